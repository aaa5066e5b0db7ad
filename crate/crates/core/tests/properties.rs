use nemel::director::{director_rhs, director_step, length_deviation, DirectorField, DirectorParams, Kinematics};
use nemel::flow::{leslie_divergence, project};
use nemel::grid::{BoundaryKind, Grid, WallClosure};
use nemel::material::*;
use nemel::nernst_planck::{bernoulli, np_step, positivity_dt_limit, IonState};
use nemel::poisson::{apply_aniso, field_tensor, EpsField, SolverOptions};
use proptest::prelude::*;

fn grid() -> impl Strategy<Value = Grid> {
    (4usize..11, 4usize..11, 0.5f64..2.0, 0.5f64..2.0).prop_map(|(nx, ny, lx, ly)| Grid::new(nx, ny, lx, ly).unwrap())
}

fn field(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, n)
}

/// Grid plus a cell field and a second cell field.
fn grid_and_two(lo: f64, hi: f64) -> impl Strategy<Value = (Grid, Vec<f64>, Vec<f64>)> {
    grid().prop_flat_map(move |g| {
        let n = g.cells();
        (Just(g), field(n, lo, hi), field(n, lo, hi))
    })
}

/// Grid, a cell field, and a face velocity with zero wall-normal components.
fn grid_cells_faces(lo: f64, hi: f64) -> impl Strategy<Value = (Grid, Vec<f64>, Vec<f64>, Vec<f64>)> {
    grid().prop_flat_map(move |g| {
        let (n, nu, nv) = (g.cells(), g.xfaces(), g.yfaces());
        (Just(g), field(n, lo, hi), field(nu, -1.0, 1.0), field(nv, -1.0, 1.0))
    })
    .prop_map(|(g, f, mut u, mut v)| {
        zero_walls(&g, &mut u, &mut v);
        (g, f, u, v)
    })
}

fn zero_walls(g: &Grid, u: &mut [f64], v: &mut [f64]) {
    for j in 0..g.ny {
        u[g.fx(0, j)] = 0.0;
        u[g.fx(g.nx, j)] = 0.0;
    }
    for i in 0..g.nx {
        v[g.fy(i, 0)] = 0.0;
        v[g.fy(i, g.ny)] = 0.0;
    }
}

fn valid_leslie() -> impl Strategy<Value = LeslieCoefficients> {
    (0.0f64..1.0, -1.5f64..0.0, -0.5f64..0.5, 0.1f64..2.0, 0.0f64..1.0, -0.5f64..1.0)
        .prop_map(|(a1, a2, a3, a4, a5, a6)| LeslieCoefficients::new([a1, a2, a3, a4, a5, a6]))
        .prop_filter("outside the positivity set", |c| validate_leslie(c, DEFAULT_PARODI_TOL).satisfies_positivity)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bernoulli_is_positive_and_satisfies_the_reflection_identity(x in -50.0f64..50.0) {
        let (b, bm) = (bernoulli(x), bernoulli(-x));
        prop_assert!(b > 0.0);
        prop_assert!((bm - b - x).abs() <= 1e-12 * (1.0 + x.abs()));
    }

    #[test]
    fn gradient_and_divergence_are_negative_adjoints((g, f, u, v) in grid_cells_faces(-1.0, 1.0)) {
        let (gx, gy) = g.grad_cc(&f, BoundaryKind::NoFlux);
        let lhs: f64 = gx.iter().zip(&u).chain(gy.iter().zip(&v)).map(|(a, b)| a * b).sum::<f64>() * g.cell_area();
        let rhs = -g.inner(&f, &g.div_fc(&u, &v));
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn anisotropic_operator_is_symmetric_positive((g, p, q) in grid_and_two(-1.0, 1.0), theta in 0.0f64..6.3, eps_a in 0.0f64..3.0) {
        let d1 = vec![theta.cos(); g.cells()];
        let d2: Vec<f64> = (0..g.cells()).map(|k| (theta + 0.3 * k as f64).sin()).collect();
        let d = DirectorField::new(d1, d2).renormalized();
        let eps = EpsField::from_director(&g, &d.d1, &d.d2, &Permittivity::new(1.0, eps_a).unwrap());
        let ap = apply_aniso(&g, &eps, &p);
        let aq = apply_aniso(&g, &eps, &q);
        let (pq, qp) = (g.inner(&q, &ap), g.inner(&p, &aq));
        prop_assert!((pq - qp).abs() <= 1e-9 * (1.0 + pq.abs()), "{pq} vs {qp}");
        prop_assert!(g.inner(&p, &ap) > 0.0);
    }

    #[test]
    fn ion_step_conserves_mass_and_stays_positive((g, c, u, v) in grid_cells_faces(0.1, 2.0)) {
        let species = vec![IonSpecies::scalar(1.0, 1.0, 1.0).unwrap(), IonSpecies::scalar(-2.0, 0.5, 1.0).unwrap()];
        let phi = g.sample_cells(|x, y| 2.0 * (3.0 * x).sin() * (2.0 * y).cos());
        let ion = IonState::new(&g, vec![c.clone(), c.iter().rev().copied().collect()]);
        let dt = 0.9 * positivity_dt_limit(&g, &phi, &u, &v, &species);
        let next = np_step(&g, &ion, &phi, &u, &v, &species, dt).unwrap();
        for (k, m0) in ion.current_masses(&g).iter().enumerate() {
            let m1 = g.integrate(&next.c[k]);
            prop_assert!(((m1 - m0) / m0).abs() <= 1e-12, "species {k}: {m0} -> {m1}");
        }
        prop_assert!(next.min_concentration() > 0.0);
    }

    #[test]
    fn renormalized_director_step_keeps_unit_length((g, theta, _) in grid_and_two(-3.0, 3.0), eps_a in -0.5f64..1.0) {
        let d = DirectorField::from_angle(&theta);
        let phi = g.sample_cells(|x, y| x * y);
        let params = DirectorParams { gamma1: 1.0, gamma2: -0.3, eps_a };
        let rates = director_rhs(&g, &d, &Kinematics::at_rest(&g), &field_tensor(&g, &phi), &params).unwrap();
        let dt = 0.1 * g.h_min() * g.h_min();
        let next = director_step(&g, &d, &rates, dt, true).unwrap();
        prop_assert!(length_deviation(&next.d1, &next.d2) <= 1e-14);
    }

    #[test]
    fn coercivity_holds_for_valid_coefficients(
        c in valid_leslie(),
        t in 0.0f64..6.3,
        (s11, s12, s22) in (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0),
        (a1, a2) in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        let r = validate_leslie(&c, DEFAULT_PARODI_TOL);
        let delta = r.delta.unwrap();
        prop_assert!(delta > 0.0);
        let d = Vec2::new(t.cos(), t.sin());
        let dv = Mat2::new(s11, s12, s12, s22);
        let a = Vec2::new(a1, a2);
        let q = dissipation_quadratic_form(&c, &d, &dv, &a);
        prop_assert!(q >= delta * a.norm_squared() - 1e-12 * (1.0 + q.abs()));
    }

    #[test]
    fn projection_removes_the_divergence((g, _, u, v) in grid_cells_faces(0.0, 1.0)) {
        let (pu, pv, _) = project(&g, &u, &v, &SolverOptions { tol: 1e-13, ..Default::default() }).unwrap();
        let div = g.div_fc(&pu, &pv);
        let scale = u.iter().chain(&v).fold(0.0f64, |m, x| m.max(x.abs())) / g.h_min();
        prop_assert!(div.iter().all(|x| x.abs() <= 1e-9 * (1.0 + scale)));
    }

    #[test]
    fn leslie_divergence_is_adjoint_to_the_wall_gradient((g, _, u, v) in grid_cells_faces(0.0, 1.0), s in prop::collection::vec(-1.0f64..1.0, 4)) {
        let sigma: Vec<Mat2> = (0..g.cells())
            .map(|k| Mat2::new(s[0], s[1], s[2], s[3]) * ((k as f64) * 0.37).cos())
            .collect();
        let (fx, fy) = leslie_divergence(&g, &sigma);
        let power: f64 = fx.iter().zip(&u).chain(fy.iter().zip(&v)).map(|(a, b)| a * b).sum::<f64>() * g.cell_area();
        let grad = g.velocity_gradient(&u, &v, WallClosure::NoSlip);
        let work: f64 = (0..g.cells()).map(|k| sigma[k].component_mul(&grad.full(k)).sum()).sum::<f64>() * g.cell_area();
        prop_assert!((power + work).abs() <= 1e-10 * (1.0 + work.abs()), "{power} vs {work}");
    }
}
