//! Property suites shared by the integration tests. Each returns the number
//! of cases checked or a description of the first counterexample.
#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use faer::{Mat, Side};
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use sosgap::certify::{compute_residual, verify, RationalMatrix, SosWitness};
use sosgap::group::{elementary_generators, generate_ball, Ball, GeneratingSet, Ring};
use sosgap::group_ring::GroupRingElement;
use sosgap::numerics::{float_to_rational, parse_rational, BigRational, Interval};
use sosgap::sdp::svec::{smat, svec, svec_len};
use sosgap::sdp::{build_instance, ConeBlock, ConicProgram};
use sosgap::solver::{project_psd, SolverState};

pub type Outcome = Result<usize, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SL(2,3) with its elementary generators, and a ball holding the whole group.
pub fn sl23() -> (GeneratingSet, Arc<Ball>) {
    let s = elementary_generators(2, Ring::IntegersModP(3)).unwrap();
    let ball = Arc::new(generate_ball(&s, 12).unwrap());
    assert_eq!(ball.len(), 24);
    (s, ball)
}

fn q(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

/// Convolution by multiplying every pair of matrices, indexed by entries.
fn naive_convolve(a: &[BigRational], b: &[BigRational], ball: &Ball) -> Vec<BigRational> {
    let index: HashMap<Vec<i64>, usize> = (0..ball.len()).map(|i| (ball.key(i).to_vec(), i)).collect();
    let mut out = vec![BigRational::zero(); ball.len()];
    for (i, x) in a.iter().enumerate().filter(|(_, x)| !x.is_zero()) {
        let g = ball.element(i);
        for (j, y) in b.iter().enumerate().filter(|(_, y)| !y.is_zero()) {
            let h = ball.element(j);
            out[index[g.multiply(&h).unwrap().key()]] += x * y;
        }
    }
    out
}

fn naive_star(a: &[BigRational], ball: &Ball) -> Vec<BigRational> {
    let index: HashMap<Vec<i64>, usize> = (0..ball.len()).map(|i| (ball.key(i).to_vec(), i)).collect();
    let mut out = vec![BigRational::zero(); ball.len()];
    for (i, x) in a.iter().enumerate() {
        out[index[ball.element(i).inverse().unwrap().key()]] = x.clone();
    }
    out
}

fn random_element(rng: &mut ChaCha8Rng, ball: &Arc<Ball>) -> GroupRingElement<BigRational> {
    let density = rng.gen_range(0.1..1.0);
    let coeffs = (0..ball.len())
        .map(|_| if rng.gen_bool(density) { q(rng.gen_range(-9..=9)) } else { BigRational::zero() })
        .collect();
    GroupRingElement::from_coeffs(ball.clone(), coeffs).unwrap()
}

/// Ring axioms, `*` as an anti-homomorphism, and agreement with the naive
/// convolution, on random elements of `Q[SL(2,3)]`.
pub fn group_ring_axioms(cases: usize, seed: u64) -> Outcome {
    let (_, ball) = sl23();
    let mut r = rng(seed);
    if !ball.element(0).is_identity() {
        return Err("ball does not start at the identity".into());
    }
    let one = GroupRingElement::monomial(ball.clone(), 0, q(1));
    for case in 0..cases {
        let (a, b, c) = (random_element(&mut r, &ball), random_element(&mut r, &ball), random_element(&mut r, &ball));
        let mul = |x: &GroupRingElement<BigRational>, y: &GroupRingElement<BigRational>| x.convolve(y, &ball).unwrap();
        let fail = |what: &str| Err(format!("case {case}: {what}"));
        let ab = mul(&a, &b);
        if ab.coeffs() != naive_convolve(a.coeffs(), b.coeffs(), &ball).as_slice() {
            return fail("convolution differs from the naive product");
        }
        let eq = |x: &GroupRingElement<BigRational>, y: &GroupRingElement<BigRational>| x.coeffs() == y.coeffs();
        if !eq(&mul(&ab, &c), &mul(&a, &mul(&b, &c))) {
            return fail("associativity");
        }
        if !eq(&mul(&a, &b.add(&c).unwrap()), &mul(&a, &b).add(&mul(&a, &c)).unwrap())
            || !eq(&mul(&a.add(&b).unwrap(), &c), &mul(&a, &c).add(&mul(&b, &c)).unwrap())
        {
            return fail("distributivity");
        }
        if !eq(&mul(&one, &a), &a) || !eq(&mul(&a, &one), &a) {
            return fail("unit");
        }
        if !eq(&ab.star().unwrap(), &mul(&b.star().unwrap(), &a.star().unwrap())) {
            return fail("star is not an anti-homomorphism");
        }
        if a.star().unwrap().coeffs() != naive_star(a.coeffs(), &ball).as_slice()
            || !eq(&a.star().unwrap().star().unwrap(), &a)
        {
            return fail("star");
        }
        if ab.augmentation() != a.augmentation() * b.augmentation() {
            return fail("augmentation is not multiplicative");
        }
        let cv = case as i64 % 7 - 3;
        if !eq(&mul(&a.scale(&q(cv)), &b), &ab.scale(&q(cv))) {
            return fail("scaling");
        }
    }
    Ok(cases)
}

fn random_float(rng: &mut ChaCha8Rng) -> f64 {
    let mantissa: f64 = rng.gen_range(-1.0..1.0);
    match rng.gen_range(0..10) {
        0 => rng.gen_range(-20i64..=20) as f64,
        1 => mantissa * 2f64.powi(rng.gen_range(-1060..-1000)),
        _ => mantissa * 2f64.powi(rng.gen_range(-200..200)),
    }
}

fn random_interval(rng: &mut ChaCha8Rng) -> Interval {
    let a = random_float(rng);
    if rng.gen_bool(0.5) {
        return Interval::point(a);
    }
    let b = a + random_float(rng).abs() * rng.gen_range(0.0..1.0);
    Interval::new(a.min(b), a.max(b))
}

/// `+`, `−`, `×` and `|·|` against exact rational arithmetic at the
/// endpoints of the operands.
pub fn interval_scalar_fuzz(cases: usize, seed: u64) -> Outcome {
    let mut r = rng(seed);
    for case in 0..cases {
        let (x, y) = (random_interval(&mut r), random_interval(&mut r));
        let xs = [x.lo(), x.hi()][r.gen_range(0..2)];
        let ys = [y.lo(), y.hi()][r.gen_range(0..2)];
        let (xq, yq) = (float_to_rational(xs).unwrap(), float_to_rational(ys).unwrap());
        let checks =
            [(x + y, &xq + &yq, "+"), (x - y, &xq - &yq, "-"), (x * y, &xq * &yq, "*"), (x.abs(), xq.abs(), "abs")];
        for (iv, exact, op) in checks {
            if !iv.contains_rational(&exact) {
                return Err(format!("case {case}: {x} {op} {y} = {iv} misses the exact value"));
            }
        }
    }
    Ok(cases * 4)
}

/// Interval convolution over the SL(2,3) multiplication table against the
/// exact rational convolution of the same floats.
pub fn interval_convolution_fuzz(cases: usize, seed: u64) -> Outcome {
    let (s, _) = sl23();
    let inst = build_instance(&s, 2).unwrap();
    let (basis, product) = (inst.basis().clone(), inst.product().clone());
    let mut r = rng(seed);
    for case in 0..cases {
        let floats: Vec<Vec<f64>> =
            (0..2).map(|_| (0..basis.len()).map(|_| random_float(&mut r) * 1e-3).collect()).collect();
        let iv: Vec<GroupRingElement<Interval>> = floats
            .iter()
            .map(|f| {
                GroupRingElement::from_coeffs(basis.clone(), f.iter().map(|&x| Interval::point(x)).collect()).unwrap()
            })
            .collect();
        let ex: Vec<Vec<BigRational>> =
            floats.iter().map(|f| f.iter().map(|&x| float_to_rational(x).unwrap()).collect()).collect();
        let got = iv[0].convolve_table(&iv[1], inst.table(), &product).unwrap();
        let star = iv[0].star_convolve(&iv[1], inst.table(), &product).unwrap();
        // exact products on the whole group, then read back on the product ball
        let (_, full) = sl23();
        let lift = |v: &[BigRational]| -> Vec<BigRational> {
            let mut out = vec![BigRational::zero(); full.len()];
            for (i, x) in v.iter().enumerate() {
                out[full.index_of(&basis.element(i)).unwrap()] = x.clone();
            }
            out
        };
        let (a, b) = (lift(&ex[0]), lift(&ex[1]));
        let exact = naive_convolve(&a, &b, &full);
        let exact_star = naive_convolve(&naive_star(&a, &full), &b, &full);
        for g in 0..product.len() {
            let k = full.index_of(&product.element(g)).unwrap();
            if !got.coeff(g).contains_rational(&exact[k]) || !star.coeff(g).contains_rational(&exact_star[k]) {
                return Err(format!("case {case}: coefficient {g} misses the exact value"));
            }
        }
    }
    Ok(cases)
}

fn dense_min_eig(m: &[f64], side: usize) -> f64 {
    let mat = Mat::from_fn(side, side, |i, j| m[i * side + j]);
    let eig = mat.self_adjoint_eigen(Side::Lower).unwrap();
    eig.S().column_vector().iter().cloned().fold(f64::INFINITY, f64::min)
}

fn random_symmetric(r: &mut ChaCha8Rng, side: usize, scale: f64) -> Vec<f64> {
    let mut m = vec![0.0; side * side];
    for i in 0..side {
        for j in 0..=i {
            let v = r.gen_range(-scale..scale);
            m[i * side + j] = v;
            m[j * side + i] = v;
        }
    }
    m
}

fn frob(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// PSD projection: PSD output, idempotent, non-expansive, and orthogonal
/// residual (`⟨M − P, P⟩ = 0` with `M − P ⪯ 0`).
pub fn psd_projection_fuzz(cases: usize, max_side: usize, seed: u64) -> Outcome {
    let mut r = rng(seed);
    for case in 0..cases {
        let side = r.gen_range(1..=max_side);
        let scale = 10f64.powi(r.gen_range(-3..4));
        let a = random_symmetric(&mut r, side, scale);
        let b: Vec<f64> = {
            let spread = scale * r.gen_range(1e-3..1.0);
            let d = random_symmetric(&mut r, side, spread);
            let mut b: Vec<f64> = a.iter().zip(&d).map(|(x, y)| x + y).collect();
            for i in 0..side {
                for j in 0..i {
                    b[j * side + i] = b[i * side + j];
                }
            }
            b
        };
        let pa = project_psd(&a, side).unwrap();
        let pb = project_psd(&b, side).unwrap();
        let tol = 1e-12 * scale * side as f64;
        let fail = |what: &str| Err(format!("case {case} (side {side}): {what}"));
        if dense_min_eig(&pa, side) < -tol {
            return fail("projection is not PSD");
        }
        if frob(&project_psd(&pa, side).unwrap(), &pa) > tol {
            return fail("projection is not idempotent");
        }
        if frob(&pa, &pb) > frob(&a, &b) + tol {
            return fail("projection expands distances");
        }
        let resid: Vec<f64> = a.iter().zip(&pa).map(|(x, p)| x - p).collect();
        let inner: f64 = resid.iter().zip(&pa).map(|(x, p)| x * p).sum();
        if inner.abs() > tol * scale || -dense_min_eig(&resid.iter().map(|x| -x).collect::<Vec<_>>(), side) > tol {
            return fail("residual is not a normal direction");
        }
    }
    Ok(cases)
}

/// `ℓ₁` bound of the residual for the witness `ξ = Δ`, `λ = 0`.
pub fn trivial_witness_l1(n: usize, ring: Ring, d: u32) -> f64 {
    let s = elementary_generators(n, ring).unwrap();
    let inst = build_instance(&s, d).unwrap();
    let entries = inst.laplacian_on_basis().unwrap().coeffs().to_vec();
    let w = SosWitness::new(
        inst.basis().clone(),
        RationalMatrix { rows: entries.len(), cols: 1, entries },
        BigRational::zero(),
    )
    .unwrap();
    compute_residual(&inst, &w).unwrap().1
}

/// `min ⟨C, X⟩ + cᵀt` subject to `⟨A_i, X⟩ + a_iᵀt = b_i`, `X ⪰ 0`, `t ≥ 0`,
/// built around a strictly feasible primal point and a strictly feasible dual.
pub fn random_sdp(r: &mut ChaCha8Rng, side: usize) -> ConicProgram {
    let plen = svec_len(side);
    let nt = r.gen_range(0..4);
    let n = plen + nt;
    let m = r.gen_range(1..=plen.min(12));
    let pd = |r: &mut ChaCha8Rng| -> Vec<f64> {
        let g = random_symmetric(r, side, 1.0);
        let mut x = vec![0.0; side * side];
        for i in 0..side {
            for j in 0..side {
                x[i * side + j] = (0..side).map(|k| g[i * side + k] * g[j * side + k]).sum::<f64>() / side as f64;
            }
            x[i * side + i] += 0.5;
        }
        x
    };
    let x0: Vec<f64> = svec(&pd(r), side).into_iter().chain((0..nt).map(|_| r.gen_range(0.5..2.0))).collect();
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let ai = svec(&random_symmetric(r, side, 1.0), side);
            ai.into_iter().chain((0..nt).map(|_| r.gen_range(-1.0..1.0))).collect()
        })
        .collect();
    let y0: Vec<f64> = (0..m).map(|_| r.gen_range(-1.0..1.0)).collect();
    let slack: Vec<f64> = svec(&pd(r), side).into_iter().chain((0..nt).map(|_| r.gen_range(0.5..2.0))).collect();
    let c: Vec<f64> = (0..n).map(|j| (0..m).map(|i| y0[i] * rows[i][j]).sum::<f64>() + slack[j]).collect();
    let b: Vec<f64> = rows.iter().map(|a| a.iter().zip(&x0).map(|(a, x)| a * x).sum()).collect();

    let mut trip = Vec::new();
    for (i, a) in rows.iter().enumerate() {
        trip.extend(a.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, &v)| (i, j, v)));
    }
    let mut cones = vec![ConeBlock::Zero(m)];
    if nt > 0 {
        cones.push(ConeBlock::Nonneg(nt));
        trip.extend((0..nt).map(|k| (m + k, plen + k, -1.0)));
    }
    let psd0 = m + nt;
    trip.extend((0..plen).map(|k| (psd0 + k, k, -1.0)));
    cones.push(ConeBlock::Psd(side));
    let bb: Vec<f64> = b.into_iter().chain(std::iter::repeat_n(0.0, nt + plen)).collect();
    let objective = c.into_iter().enumerate().collect();
    ConicProgram::new(n, objective, trip, bb, cones, vec![], None).unwrap()
}

/// KKT violation of a state, evaluated from the raw program data: relative
/// primal and dual residuals, gap, and distances of `s` to `K` and `y` to `K*`.
pub fn kkt_violation(p: &ConicProgram, st: &SolverState) -> f64 {
    let (m, n) = (p.n_rows(), p.n_vars());
    let mut ax = vec![0.0; m];
    let mut aty = vec![0.0; n];
    for &(i, j, v) in p.triplets() {
        ax[i] += v * st.x[j];
        aty[j] += v * st.y[i];
    }
    let mut qv = vec![0.0; n];
    for &(j, v) in p.objective() {
        qv[j] = v;
    }
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let b = p.b();
    let rp: Vec<f64> = (0..m).map(|i| ax[i] + st.s[i] - b[i]).collect();
    let rd: Vec<f64> = (0..n).map(|j| qv[j] + aty[j]).collect();
    let pobj: f64 = qv.iter().zip(&st.x).map(|(a, b)| a * b).sum();
    let dobj: f64 = -b.iter().zip(&st.y).map(|(a, b)| a * b).sum::<f64>();
    let mut worst = (inf(&rp) / (1.0 + inf(b))).max(inf(&rd) / (1.0 + inf(&qv)));
    worst = worst.max((pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()));
    let mut at = 0;
    for cone in p.cones() {
        let d = cone.dim();
        let (s, y) = (&st.s[at..at + d], &st.y[at..at + d]);
        match *cone {
            ConeBlock::Zero(_) => worst = worst.max(inf(s) / (1.0 + inf(b))),
            ConeBlock::Nonneg(_) => {
                let neg = s.iter().chain(y).fold(0.0f64, |a, &x| a.max(-x));
                worst = worst.max(neg / (1.0 + inf(b)));
            }
            ConeBlock::Psd(side) => {
                let es = -dense_min_eig(&smat(s, side), side);
                let ey = -dense_min_eig(&smat(y, side), side);
                worst = worst.max(es.max(0.0) / (1.0 + inf(b))).max(ey.max(0.0) / (1.0 + inf(&qv)));
            }
        }
        at += d;
    }
    worst
}

/// Alters one JSON leaf in place; false if the leaf has no meaningful change.
fn mutate_leaf(v: &mut Value) -> bool {
    match v {
        Value::Number(num) => {
            if let Some(i) = num.as_i64() {
                *v = Value::from(i + 1);
            } else if let Some(f) = num.as_f64() {
                *v = Value::from(f * 1.5 + 1.0);
            } else {
                return false;
            }
            true
        }
        Value::String(s) => {
            if let Ok(x) = sosgap::numerics::parse_hex(s) {
                *s = sosgap::numerics::format_hex(x * 1.5 + 2f64.powi(-20));
            } else if let Ok(x) = parse_rational(s) {
                *s = sosgap::numerics::format_rational(&(x + BigRational::new(1.into(), 1024.into())));
            } else if let Some(last) = s.pop() {
                s.push(if last == '0' { '1' } else { '0' });
            } else {
                s.push('x');
            }
            true
        }
        Value::Bool(b) => {
            *b = !*b;
            true
        }
        _ => false,
    }
}

fn leaf_paths(v: &Value, path: &mut Vec<Value>, out: &mut Vec<Vec<Value>>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                path.push(Value::from(k.clone()));
                leaf_paths(x, path, out);
                path.pop();
            }
        }
        Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                path.push(Value::from(i));
                leaf_paths(x, path, out);
                path.pop();
            }
        }
        _ => out.push(path.clone()),
    }
}

fn leaf_mut<'a>(v: &'a mut Value, path: &[Value]) -> &'a mut Value {
    path.iter().fold(v, |v, k| match k {
        Value::String(s) => &mut v[s.as_str()],
        Value::Number(i) => &mut v[i.as_u64().unwrap() as usize],
        _ => unreachable!(),
    })
}

/// `verify` must accept the certificate and reject it after changing any
/// single leaf of the document. `stride` > 1 samples the witness entries.
pub fn mutation_sweep(text: &str, stride: usize) -> Outcome {
    verify(text).map_err(|e| format!("original rejected: {e}"))?;
    let doc: Value = serde_json::from_str(text).unwrap();
    let mut paths = Vec::new();
    leaf_paths(&doc, &mut Vec::new(), &mut paths);
    let mut checked = 0;
    for (k, path) in paths.iter().enumerate() {
        let in_witness = path.first() == Some(&Value::from("witness")) && path.len() > 2;
        if in_witness && k % stride != 0 {
            continue;
        }
        let mut m = doc.clone();
        if !mutate_leaf(leaf_mut(&mut m, path)) {
            continue;
        }
        if verify(&serde_json::to_string_pretty(&m).unwrap()).is_ok() {
            return Err(format!("mutation at {path:?} accepted"));
        }
        checked += 1;
    }
    Ok(checked)
}
