use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dynplan::graph::linearize_with;
use dynplan::planner::{build_graph, initialize_trajectory, plan_batch, run_suite, Goal, PlanningProblem, SuiteConfig};
use dynplan::robot::bundled_model;
use dynplan::Execution;
use nalgebra::DVector;
use std::hint::black_box;

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn arm7(steps: usize) -> PlanningProblem {
    let goal = DVector::from_vec(vec![0.5, 0.4, -0.3, -1.0, 0.2, 0.6, 0.1]);
    PlanningProblem::new(bundled_model("arm7").unwrap(), DVector::zeros(7), Goal::Joint(goal), 2.0, steps).unwrap()
}

fn linearization(c: &mut Criterion) {
    let mut group = c.benchmark_group("linearize_arm7");
    for steps in [20, 80] {
        let p = arm7(steps);
        let pg = build_graph(&p).unwrap();
        let init = initialize_trajectory(&p);
        for mode in MODES {
            group.bench_with_input(BenchmarkId::new(format!("{mode:?}"), steps), &steps, |b, _| {
                b.iter(|| linearize_with(black_box(&pg.graph), black_box(&init), mode).unwrap())
            });
        }
    }
    group.finish();
}

fn batch_plan(c: &mut Criterion) {
    let mut group = c.benchmark_group("plan_arm7");
    group.sample_size(10);
    for mode in MODES {
        let mut p = arm7(30);
        p.solver.execution = mode;
        group.bench_function(format!("{mode:?}"), |b| b.iter(|| plan_batch(black_box(&p)).unwrap()));
    }
    group.finish();
}

fn suite_trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("suite_arm3_8_trials");
    group.sample_size(10);
    let base = PlanningProblem::new(bundled_model("arm3").unwrap(), DVector::zeros(3), Goal::Joint(DVector::zeros(3)), 2.0, 20).unwrap();
    for mode in MODES {
        let mut suite = SuiteConfig::parse("config = \"unused\"\ntrials = 8\nseed = 1\n").unwrap();
        suite.execution = mode;
        let mut p = base.clone();
        p.solver.execution = Execution::Sequential;
        group.bench_function(format!("{mode:?}"), |b| b.iter(|| run_suite(black_box(&suite), &p).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, linearization, batch_plan, suite_trials);
criterion_main!(benches);
