//! Self-contained certificate documents and their re-verification.
//!
//! Floats are written as C99 hex literals and rationals as `num/den`, so a
//! document round-trips bit for bit. [`verify`] rebuilds the balls from the
//! generators, recomputes every derived quantity and names the first check
//! that disagrees.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{certified_bound, chi, compute_residual, kazhdan_from_lambda, m_of, RationalMatrix, SosWitness};
use crate::error::{Error, Result};
use crate::group::{hex_digest, GeneratingSet};
use crate::numerics::{
    float_to_rational, format_hex, format_rational, parse_hex, parse_rational, round_down, BigRational,
};
use crate::sdp::{build_instance, lambda_upper_bound, SolverSolution, SolverStatus, SosInstance};

pub const CERTIFICATE_FORMAT: &str = "sosgap-certificate/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifySettings {
    /// Entries of `Q` are rounded to multiples of `2^-denominator_bits`.
    pub denominator_bits: u32,
}

impl Default for CertifySettings {
    fn default() -> Self {
        CertifySettings { denominator_bits: 30 }
    }
}

/// Hashes tying a certificate to its inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub instance_hash: String,
    /// Certifier settings under `certify`, plus whatever solver settings the caller recorded.
    pub settings: Value,
    pub settings_hash: String,
    pub witness_hash: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub group: String,
    pub generators: GeneratingSet,
    pub radius: u32,
    pub lambda0: f64,
    pub delta: f64,
    /// `(1−δ)·λ₀`, an exact dyadic.
    pub lambda_used: BigRational,
    pub prec: f64,
    pub witness: RationalMatrix,
    pub r_l1_upper: f64,
    pub m: u32,
    pub chi: u32,
    pub lambda_certified: f64,
    pub kappa_certified: f64,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WitnessRepr {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProvenanceRepr {
    instance_hash: String,
    settings: Value,
    settings_hash: String,
    witness_hash: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertificateRepr {
    format: String,
    group: String,
    generators: GeneratingSet,
    radius: u32,
    lambda0: String,
    delta: String,
    lambda_used: String,
    prec: String,
    r_l1_upper: String,
    m: u32,
    chi: u32,
    lambda_certified: String,
    kappa_certified: String,
    provenance: ProvenanceRepr,
    witness: WitnessRepr,
}

fn witness_repr(q: &RationalMatrix) -> WitnessRepr {
    WitnessRepr {
        rows: q.rows,
        cols: q.cols,
        entries: q.entries.chunks(q.cols.max(1)).map(|r| r.iter().map(format_rational).collect()).collect(),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex_digest(&Sha256::digest(bytes))
}

fn witness_hash(q: &RationalMatrix) -> String {
    sha256_hex(serde_json::to_string(&witness_repr(q)).expect("serializable").as_bytes())
}

fn settings_hash(settings: &Value) -> String {
    sha256_hex(serde_json::to_string(settings).expect("serializable").as_bytes())
}

/// Runs steps 1–5 on a constrained-solve solution. `lambda0` and `delta` are
/// the values the constrained program was built with; `solver_settings` is
/// recorded verbatim in the provenance.
pub fn certify(
    inst: &SosInstance,
    lambda0: f64,
    delta: f64,
    solution: &SolverSolution,
    settings: &CertifySettings,
    solver_settings: Value,
) -> Result<Certificate> {
    let SolverStatus::Optimal { eps } = solution.status else {
        return Err(Error::Refused(format!("solver status is {}, not optimal", solution.status)));
    };
    if solution.side != inst.basis().len() {
        return Err(Error::Mismatch("solution size differs from the basis".into()));
    }
    if !(1..=200).contains(&settings.denominator_bits) {
        return Err(Error::InvalidArgument("denominator_bits must lie in 1..=200".into()));
    }
    let lambda_used = float_to_rational(lambda_upper_bound(lambda0, delta))?;
    let witness = SosWitness::from_gram(inst.basis().clone(), &solution.p0, settings.denominator_bits, lambda_used)?;
    let mut all = serde_json::Map::new();
    all.insert("certify".into(), serde_json::to_value(settings)?);
    all.insert("solver".into(), solver_settings);
    let settings_value = Value::Object(all);
    assemble(inst, lambda0, delta, eps, witness, settings_value)
}

fn assemble(
    inst: &SosInstance,
    lambda0: f64,
    delta: f64,
    prec: f64,
    witness: SosWitness,
    settings: Value,
) -> Result<Certificate> {
    let (_, r_l1_upper) = compute_residual(inst, &witness)?;
    let generators = inst.generators().clone();
    let m = m_of(inst.product(), &generators)?;
    let chi = chi(&generators)?;
    let lambda_certified = certified_bound(round_down(&witness.lambda_used)?, prec, r_l1_upper, m);
    let kappa_certified = kazhdan_from_lambda(lambda_certified, generators.len());
    Ok(Certificate {
        group: inst.group_label(),
        radius: inst.radius(),
        lambda0,
        delta,
        lambda_used: witness.lambda_used,
        prec,
        r_l1_upper,
        m,
        chi,
        lambda_certified,
        kappa_certified,
        provenance: Provenance {
            instance_hash: inst.hash(),
            settings_hash: settings_hash(&settings),
            settings,
            witness_hash: witness_hash(&witness.q),
        },
        witness: witness.q,
        generators,
    })
}

impl Certificate {
    pub fn to_json(&self) -> String {
        let repr = CertificateRepr {
            format: CERTIFICATE_FORMAT.into(),
            group: self.group.clone(),
            generators: self.generators.clone(),
            radius: self.radius,
            lambda0: format_hex(self.lambda0),
            delta: format_hex(self.delta),
            lambda_used: format_rational(&self.lambda_used),
            prec: format_hex(self.prec),
            r_l1_upper: format_hex(self.r_l1_upper),
            m: self.m,
            chi: self.chi,
            lambda_certified: format_hex(self.lambda_certified),
            kappa_certified: format_hex(self.kappa_certified),
            provenance: ProvenanceRepr {
                instance_hash: self.provenance.instance_hash.clone(),
                settings: self.provenance.settings.clone(),
                settings_hash: self.provenance.settings_hash.clone(),
                witness_hash: self.provenance.witness_hash.clone(),
            },
            witness: witness_repr(&self.witness),
        };
        let mut s = serde_json::to_string_pretty(&repr).expect("serializable");
        s.push('\n');
        s
    }

    /// Parses a certificate without checking any of its claims.
    pub fn from_json(text: &str) -> Result<Certificate> {
        let r: CertificateRepr = serde_json::from_str(text)?;
        if r.format != CERTIFICATE_FORMAT {
            return Err(Error::Schema(format!("unexpected format {:?}", r.format)));
        }
        let w = &r.witness;
        if w.entries.len() != w.rows || w.entries.iter().any(|row| row.len() != w.cols) {
            return Err(Error::Schema("witness entries do not match rows/cols".into()));
        }
        let entries = w.entries.iter().flatten().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>()?;
        Ok(Certificate {
            group: r.group,
            generators: r.generators,
            radius: r.radius,
            lambda0: parse_hex(&r.lambda0)?,
            delta: parse_hex(&r.delta)?,
            lambda_used: parse_rational(&r.lambda_used)?,
            prec: parse_hex(&r.prec)?,
            r_l1_upper: parse_hex(&r.r_l1_upper)?,
            m: r.m,
            chi: r.chi,
            lambda_certified: parse_hex(&r.lambda_certified)?,
            kappa_certified: parse_hex(&r.kappa_certified)?,
            provenance: Provenance {
                instance_hash: r.provenance.instance_hash,
                settings: r.provenance.settings,
                settings_hash: r.provenance.settings_hash,
                witness_hash: r.provenance.witness_hash,
            },
            witness: RationalMatrix { rows: w.rows, cols: w.cols, entries },
        })
    }
}

/// The first failed check of [`verify`].
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("check `{check}` failed: {detail}")]
pub struct VerifyError {
    pub check: &'static str,
    pub detail: String,
}

fn fail<T>(check: &'static str, detail: impl Into<String>) -> std::result::Result<T, VerifyError> {
    Err(VerifyError { check, detail: detail.into() })
}

fn same(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits()
}

/// Re-checks a serialized certificate from scratch.
pub fn verify(text: &str) -> std::result::Result<Certificate, VerifyError> {
    let cert = match Certificate::from_json(text) {
        Ok(c) => c,
        Err(e) => return fail("schema", e.to_string()),
    };
    let inst = match build_instance(&cert.generators, cert.radius) {
        Ok(i) => i,
        Err(e) => return fail("instance", e.to_string()),
    };
    if inst.hash() != cert.provenance.instance_hash {
        return fail("instance", "regenerated balls hash differently");
    }
    if inst.group_label() != cert.group {
        return fail("group", format!("expected {:?}", inst.group_label()));
    }
    if settings_hash(&cert.provenance.settings) != cert.provenance.settings_hash {
        return fail("settings_hash", "settings do not match their hash");
    }
    let bits = cert.provenance.settings.get("certify").cloned().map(serde_json::from_value::<CertifySettings>);
    let Some(Ok(certify_settings)) = bits else {
        return fail("settings", "missing or malformed certify settings");
    };
    if witness_hash(&cert.witness) != cert.provenance.witness_hash {
        return fail("witness_hash", "witness does not match its hash");
    }
    if cert.witness.rows != inst.basis().len() {
        return fail("witness_shape", format!("{} rows for a basis of {}", cert.witness.rows, inst.basis().len()));
    }
    // entries are multiples of 2^-k / rows after mean subtraction
    let grid = BigRational::from_integer(
        (num_bigint::BigInt::from(1) << certify_settings.denominator_bits) * cert.witness.rows.max(1),
    );
    if let Some(bad) = cert.witness.entries.iter().position(|q| !(q * &grid).is_integer()) {
        return fail("denominator", format!("entry {bad} is off the 2^-k grid"));
    }
    let Ok(expected_used) = float_to_rational(lambda_upper_bound(cert.lambda0, cert.delta)) else {
        return fail("lambda_used", "lambda0 or delta is not finite");
    };
    if !(0.0..1.0).contains(&cert.delta) || expected_used != cert.lambda_used {
        return fail("lambda_used", "does not equal (1 - delta) * lambda0");
    }
    if !(cert.prec.is_finite() && cert.prec >= 0.0) {
        return fail("prec", "must be finite and non-negative");
    }
    let witness = match SosWitness::new(inst.basis().clone(), cert.witness.clone(), cert.lambda_used.clone()) {
        Ok(w) => w,
        Err(e) => return fail("augmentation", e.to_string()),
    };
    let (r, l1) = match compute_residual(&inst, &witness) {
        Ok(v) => v,
        Err(e) => return fail("residual", e.to_string()),
    };
    if !same(l1, cert.r_l1_upper) {
        return fail(
            "residual",
            format!("recomputed bound {} differs from {}", format_hex(l1), format_hex(cert.r_l1_upper)),
        );
    }
    let sum = r.coeffs().iter().fold(crate::numerics::Interval::zero(), |s, c| s + *c);
    if !sum.contains(0.0) {
        return fail("residual_augmentation", "residual coefficients cannot sum to zero");
    }
    let product = inst.product();
    for g in 0..product.len() {
        let Some(h) = product.inverse_index(g) else {
            return fail("residual_hermitian", "product ball is not closed under inversion");
        };
        if !r.coeff(g).intersects(r.coeff(h)) {
            return fail("residual_hermitian", format!("coefficients {g} and {h} are incompatible"));
        }
    }
    let generators = inst.generators();
    match chi(generators) {
        Ok(c) if c == cert.chi => {}
        _ => return fail("chi", "chi(S) differs"),
    }
    match m_of(product, generators) {
        Ok(m) if m == cert.m => {}
        _ => return fail("m", "m differs"),
    }
    let Ok(used) = round_down(&cert.lambda_used) else {
        return fail("lambda_used", "out of range");
    };
    let bound = certified_bound(used, cert.prec, l1, cert.m);
    if !same(bound, cert.lambda_certified) {
        return fail("lambda_certified", format!("recomputed {}", format_hex(bound)));
    }
    if !same(kazhdan_from_lambda(bound, generators.len()), cert.kappa_certified) {
        return fail("kappa_certified", "recomputed Kazhdan bound differs");
    }
    if bound <= 0.0 {
        return fail("positive", "certified bound is not positive");
    }
    Ok(cert)
}

/// Certificate for an explicit witness.
#[cfg(test)]
pub(crate) fn certificate_from_witness(
    inst: &SosInstance,
    lambda0: f64,
    delta: f64,
    prec: f64,
    q: RationalMatrix,
    settings: &CertifySettings,
) -> Result<Certificate> {
    let witness = SosWitness::new(inst.basis().clone(), q, float_to_rational(lambda_upper_bound(lambda0, delta))?)?;
    let mut all = serde_json::Map::new();
    all.insert("certify".into(), serde_json::to_value(settings)?);
    assemble(inst, lambda0, delta, prec, witness, Value::Object(all))
}
