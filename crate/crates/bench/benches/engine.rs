#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::hint::black_box;

use common::{random_world, WorldSpec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fm_core::fixtures;
use fm_core::{fixpoint, search, MatcherWeights, Query, Session, TrainingConfig};

fn bench_fixpoint(c: &mut Criterion) {
    let cases: Vec<_> = (0..20).map(common::random_fixpoint_case).collect();
    c.bench_function("fixpoint/20 random cases", |b| {
        b.iter(|| {
            for case in &cases {
                black_box(fixpoint(
                    case.l0.clone(),
                    &case.commitments,
                    &case.taxonomy,
                    &case.ontology,
                ));
            }
        })
    });
}

fn bench_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("search");
    for resources in [100, 1000] {
        let spec = WorldSpec {
            resources,
            assignments: resources * 3,
            associations: 80,
            ..WorldSpec::default()
        };
        let w = random_world(7, &spec);
        let view = w.view(MatcherWeights::uniform());
        group.bench_with_input(BenchmarkId::from_parameter(resources), &view, |b, view| {
            b.iter(|| {
                let mut s = Session::open("bench", "u0", view.clone());
                black_box(search(&mut s, &Query::new("red sport car family van")).unwrap())
            })
        });
    }
    group.finish();
}

fn bench_matcher(c: &mut Criterion) {
    let w = random_world(3, &WorldSpec::default());
    let view = w.view(MatcherWeights::uniform());
    let concepts: Vec<String> = common::Graph::of(&w.ontology)
        .concepts
        .into_iter()
        .collect();
    c.bench_function("matcher/all dimension pairs", |b| {
        let ctx = view.match_context();
        b.iter(|| {
            for a in &concepts {
                for z in &concepts {
                    black_box(ctx.dimensions(a, z).unwrap());
                }
            }
        })
    });
    let fx = fixtures::cars().unwrap();
    c.bench_function("matcher/train cars", |b| {
        b.iter(|| black_box(fx.train(&TrainingConfig::default()).unwrap()))
    });
}

fn bench_car_scenario(c: &mut Criterion) {
    let fx = fixtures::cars().unwrap();
    let view = fx.default_view().unwrap();
    c.bench_function("scenario/sport car then SUV", |b| {
        b.iter(|| {
            let mut s = Session::open("bench", "mark", view.clone());
            let q = Query::new("sport car");
            search(&mut s, &q).unwrap();
            s.commit("BodyStyle=SUV".parse().unwrap()).unwrap();
            black_box(search(&mut s, &q).unwrap())
        })
    });
}

criterion_group!(
    benches,
    bench_fixpoint,
    bench_search,
    bench_matcher,
    bench_car_scenario
);
criterion_main!(benches);
