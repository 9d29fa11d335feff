mod support;

use std::sync::OnceLock;

use sosgap::certify::{verify, CertifySettings};
use sosgap::group::{BallBundle, Ring};
use sosgap::pipeline::*;
use sosgap::sdp::{SolverStatus, SosInstance};
use sosgap::solver::Settings;
use sosgap::Error;

fn sl23_config() -> RunConfig {
    RunConfig::new(2, Ring::IntegersModP(3), 3)
}

fn sl23_certificate() -> &'static String {
    static CERT: OnceLock<String> = OnceLock::new();
    CERT.get_or_init(|| match pipeline(&sl23_config(), &mut |_, _| {}) {
        Outcome::Certified(c) => c.to_json(),
        Outcome::Failed(r) => panic!("{r:?}"),
    })
}

#[test]
fn config_round_trips() {
    let mut c = RunConfig::new(3, Ring::Integers, 2);
    c.delta = 0.05;
    c.output.certificate = Some("out/cert.json".into());
    c.presolve.eps = 1.0 / 3.0;
    assert_eq!(RunConfig::parse(&c.to_toml().unwrap()).unwrap(), c);
    assert_eq!(RunConfig::parse(&c.to_json().unwrap()).unwrap(), c);

    let minimal = RunConfig::parse("family = \"SL\"\nn = 2\nring = \"Z/7\"\nd = 3\n").unwrap();
    assert_eq!(minimal, RunConfig::new(2, Ring::IntegersModP(7), 3));
    assert_eq!(minimal.presolve.eps, 1e-5);
    assert_eq!(minimal.presolve.max_iters, 20_000);
    assert_eq!(minimal.delta, 0.01);
    assert_eq!(minimal.denominator_bits, 30);

    // a partial table keeps the phase defaults for the fields it omits
    let partial = RunConfig::parse("n = 2\nring = \"Z/7\"\nd = 3\n[solve]\nmax_iters = 20\n").unwrap();
    assert_eq!(partial.solve, Settings { max_iters: 20, ..Settings::constrained() });
    assert_eq!(partial.presolve, Settings::presolve());

    for bad in [
        "family = \"SL\"\nn = 2\nring = \"Z/7\"\nd = 3\ncolour = 1\n",
        "family = \"SL\"\nn = 2\nring = \"Z/8\"\nd = 3\n",
        "family = \"SL\"\nn = 2\nring = \"Z\"\nd = 0\n",
        "family = \"SL\"\nn = 2\nring = \"Z\"\nd = 2\ndelta = 1.5\n",
        "family = \"SL\"\nn = 2\nring = \"Z\"\nd = 2\n[presolve]\nalpha = 2.5\n",
        "n = 2\nring = \"Z\"\nd = 2\n[solve]\nrh0 = 2\n",
        "n = 2\nring = \"Z\"\nd = 2\nsolve = 3\n",
        "family = \"GL\"\nn = 2\nring = \"Z\"\nd = 2\n",
    ] {
        assert!(RunConfig::parse(bad).is_err(), "{bad}");
    }
}

#[test]
fn pipeline_certificate_verifies_and_is_deterministic() {
    let text = sl23_certificate();
    let cert = verify(text).unwrap();
    assert!(cert.lambda_certified > 0.0);
    assert!(cert.kappa_certified > 0.0);
    match pipeline(&sl23_config(), &mut |_, _| {}) {
        Outcome::Certified(c) => assert_eq!(&c.to_json(), text),
        Outcome::Failed(r) => panic!("{r:?}"),
    }
}

#[test]
fn stages_compose_to_the_pipeline() {
    let config = sl23_config();
    let bundle = BallBundle::from_json(&build_stage(&config).unwrap().to_json().unwrap()).unwrap();
    let inst = SosInstance::from_bundle(bundle).unwrap();
    let artifact = solve_stage(&inst, &config, &mut |_, _| {}).unwrap().unwrap();
    let artifact = SolveArtifact::from_json(&artifact.to_json().unwrap()).unwrap();
    let cert = certify_stage(&inst, &artifact, &config.certify_settings()).unwrap().unwrap();
    assert_eq!(&cert.to_json(), sl23_certificate());

    // a coarser grid never gives a smaller residual while rounding dominates
    let mut last = 0.0;
    for bits in [20, 16, 12, 8] {
        let c = match certify_stage(&inst, &artifact, &CertifySettings { denominator_bits: bits }).unwrap() {
            Ok(c) => c.r_l1_upper,
            Err(r) => r.diagnostics["r_l1_upper"].as_f64().unwrap(),
        };
        assert!(c >= last, "bits {bits}: {c} < {last}");
        last = c;
    }

    let mut stalled = artifact.clone();
    stalled.solution.status = SolverStatus::Stalled;
    assert!(matches!(certify_stage(&inst, &stalled, &config.certify_settings()), Err(Error::Refused(_))));
}

#[test]
fn mutated_certificates_are_rejected() {
    let n = support::mutation_sweep(sl23_certificate(), 7).unwrap();
    assert!(n > 100, "{n}");
}

#[test]
fn failures_carry_stage_and_exit_code() {
    let outcome = pipeline(&RunConfig::new(2, Ring::IntegersModP(7), 2), &mut |_, _| {});
    assert_eq!(outcome.exit_code(), 2);
    let Outcome::Failed(r) = outcome else { unreachable!() };
    assert_eq!(r.kind, FailureKind::NonPositive);
    assert!(r.to_json().unwrap().ends_with("}\n"));

    let mut tiny = sl23_config();
    tiny.presolve.max_iters = 5;
    tiny.solve.max_iters = 5;
    let outcome = pipeline(&tiny, &mut |_, _| {});
    assert!(matches!(outcome.exit_code(), 2 | 3), "{outcome:?}");

    let mut bad = sl23_config();
    bad.delta = 0.0;
    let outcome = pipeline(&bad, &mut |_, _| {});
    assert_eq!(outcome.exit_code(), 4);
    let Outcome::Failed(r) = outcome else { unreachable!() };
    assert_eq!(r.stage, Stage::Input);
}
