//! JSON forms for the exchangeable objects: states as {dims, re, im},
//! measures as {kind, theta}, and protocols as lists of
//! {party, f, kraus} steps. Parsing validates through the domain
//! constructors, so a file that parses is a file that satisfies the type
//! invariants.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::locc::OneStepChannel;
use crate::measures::{MeasureKind, MeasureSpec};
use crate::tensor::MultipartiteState;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StateJson {
    dims: Vec<usize>,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// Serializes a state as {dims, re, im} with flat row-major amplitudes.
pub fn state_to_json(psi: &MultipartiteState) -> String {
    let body = StateJson {
        dims: psi.dims().to_vec(),
        re: psi.amps().iter().map(|a| a.re).collect(),
        im: psi.amps().iter().map(|a| a.im).collect(),
    };
    serde_json::to_string_pretty(&body).expect("plain arrays always serialize")
}

pub fn state_from_json(text: &str) -> Result<MultipartiteState> {
    let body: StateJson = serde_json::from_str(text)?;
    if body.re.len() != body.im.len() {
        return Err(Error::DimensionMismatch(format!(
            "re has {} entries, im has {}",
            body.re.len(),
            body.im.len()
        )));
    }
    let amps = body
        .re
        .iter()
        .zip(&body.im)
        .map(|(&re, &im)| Complex64::new(re, im))
        .collect();
    MultipartiteState::new(body.dims, amps)
}

#[derive(Debug, Serialize, Deserialize)]
struct MeasureTermJson {
    subset: Vec<usize>,
    weight: f64,
    alpha: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct MeasureJson {
    kind: String,
    theta: Vec<MeasureTermJson>,
}

const KIND_RENYI: &str = "weighted_marginal_renyi";
const KIND_GENERAL: &str = "weighted_marginal_shannon_general";

/// Serializes a measure as {kind, theta: [{subset, weight, alpha}]}.
/// Party indices are 0-based.
pub fn measure_to_json(spec: &MeasureSpec) -> String {
    let kind = match spec.kind() {
        MeasureKind::WeightedMarginalRenyi => KIND_RENYI,
        MeasureKind::WeightedMarginalShannonGeneral => KIND_GENERAL,
    };
    let body = MeasureJson {
        kind: kind.to_string(),
        theta: spec
            .terms()
            .iter()
            .map(|t| MeasureTermJson {
                subset: t.subset.clone(),
                weight: t.weight,
                alpha: t.alpha,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&body).expect("plain arrays always serialize")
}

pub fn measure_from_json(text: &str) -> Result<MeasureSpec> {
    let body: MeasureJson = serde_json::from_str(text)?;
    match body.kind.as_str() {
        KIND_RENYI => MeasureSpec::weighted_marginal_renyi(
            body.theta
                .iter()
                .map(|t| {
                    if t.subset.len() == 1 {
                        Ok((t.subset[0], t.weight, t.alpha))
                    } else {
                        Err(Error::InvalidBipartition(
                            "the Rényi kind weighs single-party cuts only".into(),
                        ))
                    }
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        KIND_GENERAL => {
            if let Some(t) = body.theta.iter().find(|t| t.alpha != 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "the general kind is Shannon only, got alpha {}",
                    t.alpha
                )));
            }
            MeasureSpec::weighted_marginal_shannon_general(
                body.theta
                    .into_iter()
                    .map(|t| (t.subset, t.weight))
                    .collect(),
            )
        }
        other => Err(Error::Json(format!("unknown measure kind {other:?}"))),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct KrausJson {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StepJson {
    party: usize,
    f: Vec<usize>,
    kraus: Vec<KrausJson>,
}

/// Serializes a protocol as a list of {party, f, kraus} steps, Kraus
/// matrices as row-major re/im grids. The input alphabet is implicit:
/// max(f) + 1 on parse.
pub fn protocol_to_json(protocol: &[OneStepChannel]) -> String {
    let steps: Vec<StepJson> = protocol
        .iter()
        .map(|ch| StepJson {
            party: ch.party(),
            f: ch.register_map().to_vec(),
            kraus: ch
                .kraus()
                .iter()
                .map(|k| KrausJson {
                    re: (0..k.nrows())
                        .map(|r| (0..k.ncols()).map(|c| k[(r, c)].re).collect())
                        .collect(),
                    im: (0..k.nrows())
                        .map(|r| (0..k.ncols()).map(|c| k[(r, c)].im).collect())
                        .collect(),
                })
                .collect(),
        })
        .collect();
    serde_json::to_string_pretty(&steps).expect("plain arrays always serialize")
}

fn kraus_from_json(k: &KrausJson) -> Result<DMatrix<Complex64>> {
    let rows = k.re.len();
    if rows == 0 || k.im.len() != rows {
        return Err(Error::DimensionMismatch(
            "re and im grids must be nonempty and congruent".into(),
        ));
    }
    let cols = k.re[0].len();
    for grid in [&k.re, &k.im] {
        if grid.iter().any(|row| row.len() != cols) {
            return Err(Error::DimensionMismatch(
                "ragged Kraus grid".into(),
            ));
        }
    }
    Ok(DMatrix::from_fn(rows, cols, |r, c| {
        Complex64::new(k.re[r][c], k.im[r][c])
    }))
}

pub fn protocol_from_json(text: &str) -> Result<Vec<OneStepChannel>> {
    let steps: Vec<StepJson> = serde_json::from_str(text)?;
    steps
        .iter()
        .map(|s| {
            let kraus = s
                .kraus
                .iter()
                .map(kraus_from_json)
                .collect::<Result<Vec<_>>>()?;
            let alphabet = s.f.iter().max().map_or(0, |&m| m + 1).max(1);
            OneStepChannel::new(s.party, s.f.clone(), kraus, alphabet)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locc::random_protocol;
    use crate::random::{random_state, rng_from_seed};

    #[test]
    fn state_round_trip_is_bit_exact() {
        let mut rng = rng_from_seed(301);
        let psi = random_state(&[2, 3, 2], &mut rng);
        let back = state_from_json(&state_to_json(&psi)).unwrap();
        assert_eq!(back.dims(), psi.dims());
        assert_eq!(back.amps(), psi.amps());
        assert!(state_from_json("{\"dims\":[2],\"re\":[1.0],\"im\":[]}").is_err());
        assert!(state_from_json("{\"dims\":[2,0],\"re\":[],\"im\":[]}").is_err());
    }

    #[test]
    fn measure_round_trips_both_kinds() {
        let renyi = MeasureSpec::weighted_marginal_renyi(vec![
            (0, 0.25, 0.0),
            (1, 0.75, 0.5),
        ])
        .unwrap();
        let back = measure_from_json(&measure_to_json(&renyi)).unwrap();
        assert_eq!(back, renyi);

        let general = MeasureSpec::weighted_marginal_shannon_general(vec![
            (vec![0, 2], 0.5),
            (vec![1], 0.5),
        ])
        .unwrap();
        let back = measure_from_json(&measure_to_json(&general)).unwrap();
        assert_eq!(back, general);

        assert!(measure_from_json("{\"kind\":\"nope\",\"theta\":[]}").is_err());
        let bad_alpha = "{\"kind\":\"weighted_marginal_shannon_general\",\
                         \"theta\":[{\"subset\":[0],\"weight\":1.0,\"alpha\":0.5}]}";
        assert!(measure_from_json(bad_alpha).is_err());
        let multi_renyi = "{\"kind\":\"weighted_marginal_renyi\",\
                           \"theta\":[{\"subset\":[0,1],\"weight\":1.0,\"alpha\":1.0}]}";
        assert!(measure_from_json(multi_renyi).is_err());
    }

    #[test]
    fn protocol_round_trips_with_alphabet_inference() {
        let protocol = random_protocol(&[2, 2], 2, 2, 55).unwrap();
        let text = protocol_to_json(&protocol);
        let back = protocol_from_json(&text).unwrap();
        assert_eq!(back.len(), protocol.len());
        for (a, b) in back.iter().zip(&protocol) {
            assert_eq!(a.party(), b.party());
            assert_eq!(a.register_map(), b.register_map());
            assert_eq!(a.input_alphabet(), b.input_alphabet());
            assert_eq!(a.is_trace_preserving(), b.is_trace_preserving());
            for (ka, kb) in a.kraus().iter().zip(b.kraus()) {
                assert_eq!(ka, kb);
            }
        }
        assert!(protocol_from_json("[{\"party\":0,\"f\":[0],\"kraus\":[{\"re\":[],\"im\":[]}]}]").is_err());
    }
}
