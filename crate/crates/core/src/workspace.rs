//! Symbol tables: coordinates, parameters, and field symbols.
//!
//! A workspace is built once and is read-only afterwards; expressions refer
//! to symbols by id. The ordering of coordinates is fixed at creation and is
//! what orientation signs of 2-forms are defined against.

use crate::error::{Error, Result};
use crate::scalar::ParamScalar;

/// Reserved name of the symbolic matrix dimension parameter.
pub const DIM_PARAM: &str = "N";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CoordId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Scalar,
    /// Square matrix of symbolic dimension N.
    Matrix,
}

#[derive(Clone, Debug)]
pub struct FieldInfo {
    pub name: String,
    pub shape: Shape,
    /// Bitmask over coordinate ids the field may depend on.
    pub deps: u64,
}

impl FieldInfo {
    pub fn is_constant(&self) -> bool {
        self.deps == 0
    }

    pub fn depends_on(&self, c: CoordId) -> bool {
        self.deps & (1 << c.0) != 0
    }
}

#[derive(Clone, Debug)]
pub struct Workspace {
    coords: Vec<String>,
    params: Vec<String>,
    fields: Vec<FieldInfo>,
}

/// Builder; symbols are validated for uniqueness as they are added.
#[derive(Clone, Debug)]
pub struct WorkspaceBuilder {
    ws: Workspace,
}

impl WorkspaceBuilder {
    pub fn new() -> Self {
        WorkspaceBuilder {
            ws: Workspace { coords: Vec::new(), params: vec![DIM_PARAM.to_string()], fields: Vec::new() },
        }
    }

    fn check_fresh(&self, name: &str) -> Result<()> {
        let taken = self.ws.coords.iter().any(|n| n == name)
            || self.ws.params.iter().any(|n| n == name)
            || self.ws.fields.iter().any(|f| f.name == name);
        if taken {
            Err(Error::DuplicateSymbol(name.to_string()))
        } else {
            Ok(())
        }
    }

    pub fn coord(&mut self, name: &str) -> Result<CoordId> {
        self.check_fresh(name)?;
        if self.ws.coords.len() >= 64 {
            return Err(Error::Invalid("at most 64 coordinates supported".into()));
        }
        self.ws.coords.push(name.to_string());
        Ok(CoordId(self.ws.coords.len() as u32 - 1))
    }

    pub fn param(&mut self, name: &str) -> Result<ParamId> {
        self.check_fresh(name)?;
        self.ws.params.push(name.to_string());
        Ok(ParamId(self.ws.params.len() as u32 - 1))
    }

    pub fn field(&mut self, name: &str, shape: Shape, deps: &[CoordId]) -> Result<FieldId> {
        self.check_fresh(name)?;
        let mut mask = 0u64;
        for c in deps {
            mask |= 1 << c.0;
        }
        self.ws.fields.push(FieldInfo { name: name.to_string(), shape, deps: mask });
        Ok(FieldId(self.ws.fields.len() as u32 - 1))
    }

    /// A constant field: empty dependency set, every derivative vanishes.
    pub fn constant_field(&mut self, name: &str, shape: Shape) -> Result<FieldId> {
        self.field(name, shape, &[])
    }

    pub fn build(self) -> Workspace {
        self.ws
    }
}

impl Default for WorkspaceBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl Workspace {
    pub fn ncoords(&self) -> usize {
        self.coords.len()
    }

    pub fn nparams(&self) -> usize {
        self.params.len()
    }

    pub fn nfields(&self) -> usize {
        self.fields.len()
    }

    pub fn coord_name(&self, c: CoordId) -> &str {
        &self.coords[c.0 as usize]
    }

    pub fn param_name(&self, p: ParamId) -> &str {
        &self.params[p.0 as usize]
    }

    pub fn param_names(&self) -> Vec<String> {
        self.params.clone()
    }

    pub fn field(&self, f: FieldId) -> &FieldInfo {
        &self.fields[f.0 as usize]
    }

    pub fn field_name(&self, f: FieldId) -> &str {
        &self.fields[f.0 as usize].name
    }

    pub fn coords(&self) -> impl Iterator<Item = CoordId> + '_ {
        (0..self.coords.len()).map(|i| CoordId(i as u32))
    }

    pub fn params(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.params.len()).map(|i| ParamId(i as u32))
    }

    pub fn fields(&self) -> impl Iterator<Item = FieldId> + '_ {
        (0..self.fields.len()).map(|i| FieldId(i as u32))
    }

    pub fn lookup_coord(&self, name: &str) -> Result<CoordId> {
        self.coords
            .iter()
            .position(|n| n == name)
            .map(|i| CoordId(i as u32))
            .ok_or_else(|| Error::UnknownSymbol(name.to_string()))
    }

    pub fn lookup_param(&self, name: &str) -> Result<ParamId> {
        self.params
            .iter()
            .position(|n| n == name)
            .map(|i| ParamId(i as u32))
            .ok_or_else(|| Error::UnknownSymbol(name.to_string()))
    }

    pub fn lookup_field(&self, name: &str) -> Result<FieldId> {
        self.fields
            .iter()
            .position(|f| f.name == name)
            .map(|i| FieldId(i as u32))
            .ok_or_else(|| Error::UnknownSymbol(name.to_string()))
    }

    /// The symbolic matrix dimension as a coefficient.
    pub fn dim_scalar(&self) -> ParamScalar {
        ParamScalar::var(self.nparams(), 0)
    }

    /// The parameter `p` as a coefficient.
    pub fn param_scalar(&self, p: ParamId) -> ParamScalar {
        ParamScalar::var(self.nparams(), p.0 as usize)
    }

    /// Exact integer coefficient.
    pub fn int(&self, n: i64) -> ParamScalar {
        ParamScalar::int(self.nparams(), n)
    }

    /// Exact rational coefficient `p/q`.
    pub fn ratio(&self, p: i64, q: i64) -> ParamScalar {
        ParamScalar::ratio(self.nparams(), p, q)
    }

    /// Exact imaginary coefficient `(p/q)*i`.
    pub fn imag(&self, p: i64, q: i64) -> ParamScalar {
        ParamScalar::imag_ratio(self.nparams(), p, q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_rejects_duplicates() {
        let mut b = WorkspaceBuilder::new();
        b.coord("xi").unwrap();
        assert!(matches!(b.coord("xi"), Err(Error::DuplicateSymbol(_))));
        assert!(matches!(b.param("xi"), Err(Error::DuplicateSymbol(_))));
        // The dimension parameter is reserved.
        assert!(matches!(b.param(DIM_PARAM), Err(Error::DuplicateSymbol(_))));
    }

    #[test]
    fn dependencies_are_tracked() {
        let mut b = WorkspaceBuilder::new();
        let xi = b.coord("xi").unwrap();
        let eta = b.coord("eta").unwrap();
        let f = b.field("ubar", Shape::Matrix, &[xi]).unwrap();
        let ws = b.build();
        assert!(ws.field(f).depends_on(xi));
        assert!(!ws.field(f).depends_on(eta));
    }
}
