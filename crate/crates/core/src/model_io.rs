//! JSON documents for models. Matrices are row-major arrays of arrays.
//!
//! Loading goes through the plain serde documents below and then through the
//! validating constructors, so every invariant violation is reported with a
//! path into the document (`$.transmission[0].A.slopes[0]`, ...).

use serde::{Deserialize, Serialize};

use crate::linalg::{matrix_to_rows, rows_to_matrix, Mat, Vector};
use crate::tsmodel::{
    invalid, AffineFamily, Dimensions, ModelError, ParamAffineModel, ParamTransmission, Premise,
    PremiseSpec, TsModel, TsParts,
};

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionsDoc {
    pub n: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub n_p: usize,
    pub n_theta: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PremiseDoc {
    pub min: f64,
    pub max: f64,
    pub selector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDoc {
    pub base: Rows,
    /// One matrix per premise; omitted means all zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slopes: Option<Vec<Rows>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionDoc {
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<FamilyDoc>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<FamilyDoc>,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub f: Option<FamilyDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamAffineDoc {
    pub dimensions: DimensionsDoc,
    pub premises: Vec<PremiseDoc>,
    #[serde(rename = "A")]
    pub a: FamilyDoc,
    #[serde(rename = "B")]
    pub b: FamilyDoc,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub f: Option<FamilyDoc>,
    #[serde(default)]
    pub transmission: Vec<TransmissionDoc>,
    #[serde(rename = "C")]
    pub c: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsModelDoc {
    pub dimensions: DimensionsDoc,
    pub premises: Vec<PremiseDoc>,
    #[serde(rename = "A")]
    pub a: Vec<Rows>,
    #[serde(rename = "B")]
    pub b: Vec<Rows>,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<Rows>>,
    /// Indexed `[submodel][parameter]`.
    #[serde(rename = "A_bar", default, skip_serializing_if = "Option::is_none")]
    pub a_bar: Option<Vec<Vec<Rows>>>,
    #[serde(rename = "B_bar", default, skip_serializing_if = "Option::is_none")]
    pub b_bar: Option<Vec<Vec<Rows>>>,
    #[serde(rename = "F_bar", default, skip_serializing_if = "Option::is_none")]
    pub f_bar: Option<Vec<Vec<Rows>>>,
    #[serde(rename = "C")]
    pub c: Rows,
}

fn matrix(path: &str, rows: &Rows, nrows: usize, ncols: usize) -> Result<Mat, ModelError> {
    let m = rows_to_matrix(rows, ncols)
        .ok_or_else(|| invalid(path, "rows must all have the same length"))?;
    if m.shape() != (nrows, ncols) {
        return Err(invalid(
            path,
            format!("expected a {nrows}x{ncols} matrix, found {}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(m)
}

fn dims_from_doc(doc: &DimensionsDoc) -> Result<Dimensions, ModelError> {
    if doc.n_p > crate::tsmodel::MAX_PREMISES {
        return Err(invalid("$.dimensions.n_p", "too many premise variables"));
    }
    let dims = Dimensions {
        n: doc.n,
        n_u: doc.n_u,
        n_y: doc.n_y,
        n_p: doc.n_p,
        n_theta: doc.n_theta,
        r: doc.r.unwrap_or(1usize << doc.n_p),
    };
    dims.validate("$.dimensions")?;
    Ok(dims)
}

fn dims_to_doc(d: &Dimensions) -> DimensionsDoc {
    DimensionsDoc {
        n: d.n,
        n_u: d.n_u,
        n_y: d.n_y,
        n_p: d.n_p,
        n_theta: d.n_theta,
        r: Some(d.r),
    }
}

fn premises_from_doc(docs: &[PremiseDoc], dims: &Dimensions) -> Result<PremiseSpec, ModelError> {
    if docs.len() != dims.n_p {
        return Err(invalid(
            "$.premises",
            format!("expected {} premise definitions, found {}", dims.n_p, docs.len()),
        ));
    }
    PremiseSpec::new(
        docs.iter()
            .map(|p| Premise {
                min: p.min,
                max: p.max,
                selector: Vector::from_row_slice(&p.selector),
            })
            .collect(),
        dims.io_len(),
    )
}

fn premises_to_doc(spec: &PremiseSpec) -> Vec<PremiseDoc> {
    spec.premises()
        .iter()
        .map(|p| PremiseDoc {
            min: p.min,
            max: p.max,
            selector: p.selector.iter().copied().collect(),
        })
        .collect()
}

fn family_from_doc(
    path: &str,
    doc: Option<&FamilyDoc>,
    rows: usize,
    cols: usize,
    n_p: usize,
) -> Result<AffineFamily, ModelError> {
    let Some(doc) = doc else {
        return Ok(AffineFamily::zeros(rows, cols, n_p));
    };
    let base = matrix(&format!("{path}.base"), &doc.base, rows, cols)?;
    let slopes = match &doc.slopes {
        None => vec![Mat::zeros(rows, cols); n_p],
        Some(list) => {
            if list.len() != n_p {
                return Err(invalid(
                    format!("{path}.slopes"),
                    format!("expected {n_p} slope matrices (one per premise), found {}", list.len()),
                ));
            }
            list.iter()
                .enumerate()
                .map(|(j, s)| matrix(&format!("{path}.slopes[{j}]"), s, rows, cols))
                .collect::<Result<_, _>>()?
        }
    };
    Ok(AffineFamily { base, slopes })
}

fn family_to_doc(f: &AffineFamily) -> FamilyDoc {
    FamilyDoc {
        base: matrix_to_rows(&f.base),
        slopes: Some(f.slopes.iter().map(matrix_to_rows).collect()),
    }
}

impl ParamAffineDoc {
    pub fn to_model(&self) -> Result<ParamAffineModel, ModelError> {
        let d = dims_from_doc(&self.dimensions)?;
        let premises = premises_from_doc(&self.premises, &d)?;
        let a = family_from_doc("$.A", Some(&self.a), d.n, d.n, d.n_p)?;
        let b = family_from_doc("$.B", Some(&self.b), d.n, d.n_u, d.n_p)?;
        let f = family_from_doc("$.F", self.f.as_ref(), d.n, 1, d.n_p)?;
        if self.transmission.len() != d.n_theta {
            return Err(invalid(
                "$.transmission",
                format!("expected {} entries (one per parameter), found {}", d.n_theta, self.transmission.len()),
            ));
        }
        let transmission = self
            .transmission
            .iter()
            .enumerate()
            .map(|(k, t)| {
                Ok(ParamTransmission {
                    a: family_from_doc(&format!("$.transmission[{k}].A"), t.a.as_ref(), d.n, d.n, d.n_p)?,
                    b: family_from_doc(&format!("$.transmission[{k}].B"), t.b.as_ref(), d.n, d.n_u, d.n_p)?,
                    f: family_from_doc(&format!("$.transmission[{k}].F"), t.f.as_ref(), d.n, 1, d.n_p)?,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let c = matrix("$.C", &self.c, d.n_y, d.n)?;
        ParamAffineModel::new(d, a, b, f, transmission, c, premises)
    }

    pub fn from_model(m: &ParamAffineModel) -> Self {
        ParamAffineDoc {
            dimensions: dims_to_doc(m.dims()),
            premises: premises_to_doc(m.premises()),
            a: family_to_doc(m.a()),
            b: family_to_doc(m.b()),
            f: Some(family_to_doc(m.f())),
            transmission: m
                .transmission()
                .iter()
                .map(|t| TransmissionDoc {
                    a: Some(family_to_doc(&t.a)),
                    b: Some(family_to_doc(&t.b)),
                    f: Some(family_to_doc(&t.f)),
                })
                .collect(),
            c: matrix_to_rows(m.c()),
        }
    }
}

fn list_from_doc(
    path: &str,
    doc: Option<&Vec<Rows>>,
    r: usize,
    rows: usize,
    cols: usize,
) -> Result<Vec<Mat>, ModelError> {
    let Some(list) = doc else {
        return Ok(vec![Mat::zeros(rows, cols); r]);
    };
    if list.len() != r {
        return Err(invalid(path, format!("expected {r} vertex matrices, found {}", list.len())));
    }
    list.iter()
        .enumerate()
        .map(|(i, m)| matrix(&format!("{path}[{i}]"), m, rows, cols))
        .collect()
}

fn grid_from_doc(
    path: &str,
    doc: Option<&Vec<Vec<Rows>>>,
    d: &Dimensions,
    rows: usize,
    cols: usize,
) -> Result<Vec<Vec<Mat>>, ModelError> {
    let Some(grid) = doc else {
        return Ok(vec![vec![Mat::zeros(rows, cols); d.n_theta]; d.r]);
    };
    if grid.len() != d.r {
        return Err(invalid(path, format!("expected {} rows (one per submodel), found {}", d.r, grid.len())));
    }
    grid.iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != d.n_theta {
                return Err(invalid(
                    format!("{path}[{i}]"),
                    format!("expected {} matrices (one per parameter), found {}", d.n_theta, row.len()),
                ));
            }
            row.iter()
                .enumerate()
                .map(|(j, m)| matrix(&format!("{path}[{i}][{j}]"), m, rows, cols))
                .collect()
        })
        .collect()
}

fn grid_to_doc(grid: &[Vec<Mat>]) -> Vec<Vec<Rows>> {
    grid.iter()
        .map(|row| row.iter().map(matrix_to_rows).collect())
        .collect()
}

impl TsModelDoc {
    pub fn to_model(&self) -> Result<TsModel, ModelError> {
        let d = dims_from_doc(&self.dimensions)?;
        let premises = premises_from_doc(&self.premises, &d)?;
        TsModel::from_parts(TsParts {
            dims: d,
            a: list_from_doc("$.A", Some(&self.a), d.r, d.n, d.n)?,
            b: list_from_doc("$.B", Some(&self.b), d.r, d.n, d.n_u)?,
            f: list_from_doc("$.F", self.f.as_ref(), d.r, d.n, 1)?,
            a_bar: grid_from_doc("$.A_bar", self.a_bar.as_ref(), &d, d.n, d.n)?,
            b_bar: grid_from_doc("$.B_bar", self.b_bar.as_ref(), &d, d.n, d.n_u)?,
            f_bar: grid_from_doc("$.F_bar", self.f_bar.as_ref(), &d, d.n, 1)?,
            c: matrix("$.C", &self.c, d.n_y, d.n)?,
            premises,
        })
    }

    pub fn from_model(m: &TsModel) -> Self {
        let p = m.parts();
        TsModelDoc {
            dimensions: dims_to_doc(&p.dims),
            premises: premises_to_doc(&p.premises),
            a: p.a.iter().map(matrix_to_rows).collect(),
            b: p.b.iter().map(matrix_to_rows).collect(),
            f: Some(p.f.iter().map(matrix_to_rows).collect()),
            a_bar: Some(grid_to_doc(&p.a_bar)),
            b_bar: Some(grid_to_doc(&p.b_bar)),
            f_bar: Some(grid_to_doc(&p.f_bar)),
            c: matrix_to_rows(&p.c),
        }
    }
}

/// Parses a JSON document, reporting serde errors with their location.
pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, ModelError> {
    serde_json::from_str(text).map_err(|e| {
        invalid(
            format!("$ (line {}, column {})", e.line(), e.column()),
            e.to_string(),
        )
    })
}
