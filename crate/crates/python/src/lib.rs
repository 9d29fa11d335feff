use pyo3::prelude::*;

#[pymodule]
mod _sosgap {
    use pyo3::exceptions::{PyRuntimeError, PyValueError};
    use pyo3::prelude::*;
    use pyo3::types::PyDict;

    use sosgap::certify;
    use sosgap::group::{elementary_generators, generate_ball, Ring};
    use sosgap::oracle::{enumerate_group, spectral_gap_exact};
    use sosgap::pipeline::{kazhdan_baselines, Outcome, RunConfig};

    #[allow(non_upper_case_globals)]
    #[pymodule_export]
    const __version__: &str = env!("CARGO_PKG_VERSION");

    fn value_error(e: impl ToString) -> PyErr {
        PyValueError::new_err(e.to_string())
    }

    fn ring(s: &str) -> PyResult<Ring> {
        s.parse().map_err(value_error)
    }

    /// Runs every stage. `config` is TOML or JSON; keyword arguments override it.
    ///
    /// Returns a dict with `kappa_analytic` (published lower and upper bounds,
    /// when known) and `status` either `"certified"` (plus `certificate`,
    /// `lambda_certified`, `kappa_certified`, `lambda0`) or `"failed"` (plus
    /// `exit_code`, `stage`, `message`, `report`).
    #[pyfunction]
    #[pyo3(signature = (n=None, ring=None, d=None, *, delta=None, config=None))]
    fn pipeline<'py>(
        py: Python<'py>,
        n: Option<usize>,
        ring: Option<&str>,
        d: Option<u32>,
        delta: Option<f64>,
        config: Option<&str>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let mut cfg = match (config, n, ring, d) {
            (Some(text), ..) => RunConfig::parse(text).map_err(value_error)?,
            (None, Some(n), Some(r), Some(d)) => RunConfig::new(n, self::ring(r)?, d),
            _ => return Err(PyValueError::new_err("give config or all of n, ring and d")),
        };
        if config.is_some() {
            if let Some(n) = n {
                cfg.n = n;
            }
            if let Some(r) = ring {
                cfg.ring = self::ring(r)?;
            }
            if let Some(d) = d {
                cfg.d = d;
            }
        }
        if let Some(v) = delta {
            cfg.delta = v;
        }
        let outcome = py.detach(|| sosgap::pipeline::pipeline(&cfg, &mut |_, _| {}));
        let out = PyDict::new(py);
        if let Some(bounds) = kazhdan_baselines(cfg.n, cfg.ring) {
            out.set_item("kappa_analytic", bounds)?;
        }
        match outcome {
            Outcome::Certified(c) => {
                out.set_item("status", "certified")?;
                out.set_item("lambda_certified", c.lambda_certified)?;
                out.set_item("kappa_certified", c.kappa_certified)?;
                out.set_item("lambda0", c.lambda0)?;
                out.set_item("certificate", c.to_json())?;
            }
            Outcome::Failed(r) => {
                out.set_item("status", "failed")?;
                out.set_item("exit_code", r.exit_code())?;
                out.set_item("stage", r.stage.to_string())?;
                out.set_item("message", &r.message)?;
                out.set_item("report", r.to_json().map_err(|e| PyRuntimeError::new_err(e.to_string()))?)?;
            }
        }
        Ok(out)
    }

    /// Re-checks a certificate; raises `ValueError` naming the failed check.
    #[pyfunction]
    fn verify<'py>(py: Python<'py>, certificate: &str) -> PyResult<Bound<'py, PyDict>> {
        let text = certificate.to_owned();
        let cert = py
            .detach(move || certify::verify(&text))
            .map_err(|e| PyValueError::new_err(format!("check {} failed: {}", e.check, e.detail)))?;
        let out = PyDict::new(py);
        out.set_item("group", &cert.group)?;
        out.set_item("radius", cert.radius)?;
        out.set_item("lambda_certified", cert.lambda_certified)?;
        out.set_item("kappa_certified", cert.kappa_certified)?;
        Ok(out)
    }

    /// Exact spectral gap of SL(n, Z/p) on its elementary generators.
    #[pyfunction]
    #[pyo3(signature = (n, ring, cap=20_000))]
    fn spectral_gap(py: Python<'_>, n: usize, ring: &str, cap: usize) -> PyResult<f64> {
        let ring = self::ring(ring)?;
        if ring == Ring::Integers {
            return Err(PyValueError::new_err("the exact gap needs a finite ring"));
        }
        py.detach(|| {
            let gens = elementary_generators(n, ring)?;
            spectral_gap_exact(&enumerate_group(&gens, cap)?)
        })
        .map_err(value_error)
    }

    /// Sizes of the balls of radius `d` and `2d`.
    #[pyfunction]
    fn ball_sizes(py: Python<'_>, n: usize, ring: &str, d: u32) -> PyResult<(usize, usize)> {
        let ring = self::ring(ring)?;
        py.detach(|| {
            let gens = elementary_generators(n, ring)?;
            Ok::<_, sosgap::Error>((generate_ball(&gens, d)?.len(), generate_ball(&gens, 2 * d)?.len()))
        })
        .map_err(value_error)
    }
}
