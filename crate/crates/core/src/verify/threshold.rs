//! Feasibility of the pinch construction across a grid of exponents.

use super::VerifyError;
use crate::energy::{energy_analytic, EnergyParams, QuadStatus, QuadratureSpec};
use crate::maps::{feasible_params, q_threshold, AnalyticMap, PinchParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    pub p: f64,
    pub q: f64,
    pub q_threshold: f64,
    pub feasible: bool,
    pub witness: Option<PinchParams>,
    pub witness_status: Option<QuadStatus>,
    /// Parameters just across `a + b = 1/q`, where the barrier integral diverges.
    pub probe: PinchParams,
    pub probe_status: Option<QuadStatus>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ThresholdTable {
    pub rows: Vec<ThresholdRow>,
}

impl ThresholdTable {
    /// Rows where the feasible flag disagrees with `q < p/(p-2)`.
    pub fn mismatches(&self) -> usize {
        self.rows.iter().filter(|r| r.feasible != (r.q < q_threshold(r.p))).count()
    }
}

fn probe_for(p: f64, q: f64, witness: Option<&PinchParams>) -> Result<PinchParams, VerifyError> {
    let (a, b) = match witness {
        Some(w) => (w.a, 1.0 / q + 0.05 - w.a),
        None => (-1.0 / p + 0.01, 1.0 - 1.0 / p + 0.01),
    };
    Ok(PinchParams::probe(a, b, p, q)?)
}

fn status(params: PinchParams, spec: &QuadratureSpec) -> Result<QuadStatus, VerifyError> {
    let e = EnergyParams::new(params.p, params.q)?;
    Ok(energy_analytic(&AnalyticMap::Pinch(params), &e, spec)?.status)
}

/// One row per `(p, q)` in row-major order over `ps × qs`. With `energy`
/// set, the pinch energy is integrated at the witness and at the probe.
pub fn threshold_sweep(ps: &[f64], qs: &[f64], energy: Option<&QuadratureSpec>) -> Result<ThresholdTable, VerifyError> {
    if let Some(&p) = ps.iter().find(|&&p| !(p > 2.0)) {
        return Err(VerifyError::PTooSmall(p));
    }
    let mut rows = Vec::with_capacity(ps.len() * qs.len());
    for &p in ps {
        for &q in qs {
            let witness = feasible_params(p, q)?;
            let probe = probe_for(p, q, witness.as_ref())?;
            let (witness_status, probe_status) = match energy {
                Some(spec) => (witness.map(|w| status(w, spec)).transpose()?, Some(status(probe, spec)?)),
                None => (None, None),
            };
            rows.push(ThresholdRow {
                p,
                q,
                q_threshold: q_threshold(p),
                feasible: witness.is_some(),
                witness,
                witness_status,
                probe,
                probe_status,
            });
        }
    }
    Ok(ThresholdTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicate_rows() {
        let t = threshold_sweep(&[3.0], &[2.0, 3.0, 4.0], None).unwrap();
        let flags: Vec<bool> = t.rows.iter().map(|r| r.feasible).collect();
        assert_eq!(flags, [true, false, false]);
        assert!(t.rows[0].witness.unwrap().is_feasible());
        assert!(t.rows[1].witness.is_none());
        let t = threshold_sweep(&[4.0], &[1.5, 2.0, 2.5], None).unwrap();
        let flags: Vec<bool> = t.rows.iter().map(|r| r.feasible).collect();
        assert_eq!(flags, [true, false, false]);
        assert_eq!(t.mismatches(), 0);
        assert!(matches!(threshold_sweep(&[3.0, 2.0], &[1.0], None), Err(VerifyError::PTooSmall(_))));
    }

    #[test]
    fn energy_status_at_witness_and_probe() {
        let spec = QuadratureSpec::default();
        let t = threshold_sweep(&[3.0], &[2.0], Some(&spec)).unwrap();
        let r = &t.rows[0];
        assert_eq!(r.witness_status, Some(QuadStatus::Converged));
        assert_eq!(r.probe_status, Some(QuadStatus::Divergent));
        assert!(r.probe.a + r.probe.b > 1.0 / r.q);
    }
}
