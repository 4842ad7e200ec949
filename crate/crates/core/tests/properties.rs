use proptest::prelude::*;

use proxipair::geometry::{
    distance_between, point, sample_body, seeded_rng, ConvexBody, LinearConstraint, LpSpace, Point, ProximityInstance,
    Side,
};
use proxipair::harness::{generate_instance, Family, InstanceFile};
use proxipair::mappings::Contraction;
use proxipair::operators::{ProximalProjector, PROPERTY_TOL};
use proxipair::solvers::{picard_cyclic, SolverOptions};

fn coords(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, dim)
}

fn p_value() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.5), Just(2.0), Just(3.0), 1.2..4.0f64]
}

/// A random bounded or unbounded body in dimension 2 to 4.
fn body() -> impl Strategy<Value = ConvexBody> {
    (2usize..=4, p_value()).prop_flat_map(|(dim, p)| {
        let space = LpSpace::new(dim, p).unwrap();
        prop_oneof![
            (coords(dim), 0.2..2.0f64).prop_map(move |(c, r)| ConvexBody::ball(space, Point::from_vec(c), r).unwrap()),
            (coords(dim), prop::collection::vec(0.1..2.0f64, dim)).prop_map(move |(lo, w)| {
                let lo = Point::from_vec(lo);
                let hi = &lo + Point::from_vec(w);
                ConvexBody::cuboid(space, lo, hi).unwrap()
            }),
            (coords(dim), -1.0..1.0f64)
                .prop_filter("nonzero normal", |(n, _)| n.iter().any(|v| v.abs() > 0.1))
                .prop_map(move |(n, b)| ConvexBody::halfspace(space, Point::from_vec(n), b).unwrap()),
            prop::collection::vec(coords(2), 3..7).prop_filter_map("full-dimensional hull", move |vs| {
                let planar = LpSpace::new(2, space.p()).unwrap();
                ConvexBody::polytope(planar, vs.into_iter().map(Point::from_vec).collect()).ok()
            }),
            (coords(dim), 0.3..2.0f64).prop_map(move |(c, size)| simplex(space, Point::from_vec(c), size)),
        ]
    })
}

/// `c + conv{0, size e_1, ..., size e_d}` with its facets.
fn simplex(space: LpSpace, c: Point, size: f64) -> ConvexBody {
    let dim = space.dim();
    let mut vertices = vec![c.clone()];
    let mut facets = Vec::new();
    for i in 0..dim {
        let mut e = Point::zeros(dim);
        e[i] = 1.0;
        vertices.push(&c + &e * size);
        facets.push(LinearConstraint::le(-&e, -c[i]));
    }
    let ones = Point::from_element(dim, 1.0);
    facets.push(LinearConstraint::le(ones.clone(), ones.dot(&c) + size));
    ConvexBody::polytope_with_halfspaces(space, vertices, facets).unwrap()
}

fn duality_map(v: &Point, p: f64) -> Point {
    v.map(|t| t.signum() * t.abs().powf(p - 1.0))
}

fn query(body: &ConvexBody, raw: &[f64]) -> Point {
    let dim = body.space().dim();
    Point::from_iterator(dim, raw.iter().cycle().take(dim).map(|v| 2.0 * v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent(b in body(), raw in coords(4)) {
        let x = query(&b, &raw);
        let y = b.project(&x).unwrap();
        let yy = b.project(&y).unwrap();
        prop_assert!((&y - &yy).amax() <= 1e-9 * (1.0 + y.amax()), "{y} -> {yy}");
        prop_assert!(b.contains(&y, 1e-8).unwrap());
    }

    #[test]
    fn projection_is_nearest_and_satisfies_the_variational_inequality(
        b in body(),
        raw in coords(4),
        seed in any::<u64>(),
    ) {
        let space = *b.space();
        let x = query(&b, &raw);
        let y = b.project(&x).unwrap();
        let d = space.distance(&x, &y).unwrap();
        let j = duality_map(&(&x - &y), space.p());
        let scale = 1.0 + x.amax() + y.amax();
        let mut rng = seeded_rng(seed);
        for _ in 0..20 {
            let z = sample_body(&b, &mut rng).unwrap();
            prop_assert!(d <= space.distance(&x, &z).unwrap() + 1e-9 * scale);
            let inner = j.dot(&(&z - &y));
            prop_assert!(inner <= 1e-7 * scale.powf(space.p()), "inner product {inner}");
        }
    }

    #[test]
    fn euclidean_projection_is_nonexpansive(b in body(), r1 in coords(4), r2 in coords(4)) {
        let space = LpSpace::euclidean(b.space().dim()).unwrap();
        prop_assume!(b.space().is_euclidean());
        let (x1, x2) = (query(&b, &r1), query(&b, &r2));
        let (y1, y2) = (b.project(&x1).unwrap(), b.project(&x2).unwrap());
        prop_assert!(space.distance(&y1, &y2).unwrap() <= space.distance(&x1, &x2).unwrap() + 1e-9);
    }

    #[test]
    fn unit_sphere_midpoints_fall_inside(
        p in p_value(),
        u in coords(3),
        v in coords(3),
    ) {
        let space = LpSpace::new(3, p).unwrap();
        let (u, v) = (Point::from_vec(u), Point::from_vec(v));
        let (nu, nv) = (space.norm(&u).unwrap(), space.norm(&v).unwrap());
        prop_assume!(nu > 1e-3 && nv > 1e-3);
        let (u, v) = (u / nu, v / nv);
        prop_assume!((&u - &v).amax() > 1e-3);
        let mid = (&u + &v) / 2.0;
        prop_assert!(space.norm(&mid).unwrap() < 1.0);
    }

    #[test]
    fn instance_files_round_trip(
        family in prop::sample::select(Family::ALL.to_vec()),
        seed in any::<u64>(),
        dim in 2usize..=5,
        p in p_value(),
    ) {
        let file = generate_instance(family, seed, dim, p, None).unwrap();
        let text = file.to_json().unwrap();
        let back = InstanceFile::from_json(&text).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(back.to_json().unwrap(), text);
        prop_assert_eq!(back.build_instance().unwrap(), file.build_instance().unwrap());
    }

    #[test]
    fn generated_distance_matches_the_constructed_gap(
        family in prop::sample::select(Family::ALL.to_vec()),
        seed in any::<u64>(),
        dim in 2usize..=6,
        p in p_value(),
        gap in 0.1..4.0f64,
    ) {
        let file = generate_instance(family, seed, dim, p, Some(gap)).unwrap();
        prop_assert_eq!(file.expected_dist, Some(gap));
        let inst = file.build_instance().unwrap();
        let d = distance_between(inst.a(), inst.b(), 1e-12, 100_000).unwrap();
        prop_assert!((d.dist - gap).abs() <= 1e-7, "{} vs {gap}", d.dist);
        prop_assert!((inst.dist() - gap).abs() <= 1e-7);
    }

    #[test]
    fn proximal_projection_is_an_involution_on_generated_boxes(
        seed in any::<u64>(),
        dim in 2usize..=5,
        p in p_value(),
        t in prop::collection::vec(0.0..1.0f64, 5),
    ) {
        let file = generate_instance(Family::SeparatedBoxes, seed, dim, p, None).unwrap();
        let inst = std::sync::Arc::new(file.build_instance().unwrap());
        let projector = ProximalProjector::new(inst.clone());
        let (ra, rb) = inst.realizing_pair();
        // A0 is a face of A containing a*; move inside it along A's free coordinates
        let (lo, hi) = inst.a().bounding_box().unwrap();
        let x = Point::from_fn(dim, |i, _| {
            if (ra[i] - rb[i]).abs() > 0.0 { ra[i] } else { lo[i] + t[i] * (hi[i] - lo[i]) }
        });
        if projector.instance().proximal_membership(&x, Side::A).unwrap() {
            let px = projector.project_from(&x, Side::A).unwrap();
            let back = projector.project_from(&px, Side::B).unwrap();
            prop_assert!((&back - &x).amax() <= PROPERTY_TOL, "x={x} px={px} back={back} a*={ra} b*={rb} excess={}", projector.instance().proximal_excess(&x, Side::A).unwrap());
            let d = inst.space().distance(&x, &px).unwrap();
            prop_assert!((d - inst.dist()).abs() <= PROPERTY_TOL);
        }
    }

    #[test]
    fn picard_iterates_alternate_between_the_sets(x in 1.0..2.0f64) {
        let file = proxipair::harness::builtin("segpair").unwrap();
        let loaded = file.load(200, 0).unwrap();
        let t = Contraction::certify(loaded.map("T").unwrap().clone(), 200, 0).unwrap();
        let res = picard_cyclic(&t, &point(&[x, 0.0]), &SolverOptions::default()).unwrap();
        let inst: &ProximityInstance = &loaded.instance;
        for (n, e) in res.trace.entries.iter().enumerate() {
            let expected = if n % 2 == 0 { Side::A } else { Side::B };
            prop_assert_eq!(e.side, expected);
            prop_assert!(inst.body(expected).contains(&e.point, 1e-9).unwrap());
        }
        prop_assert!(res.satisfies_contract(1e-9));
    }
}
