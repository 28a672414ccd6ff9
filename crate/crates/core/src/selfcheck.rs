//! Self-verification suites: brute-force matching oracle, finite-difference
//! gradient check, and grammar round-trip.
//!
//! The brute-force matcher enumerates every injective matching directly and
//! shares no code with the production solver; totals use the same canonical
//! summation order (right-fold over pairs sorted by generated index) so the
//! comparison is exact with zero tolerance.

use crate::grammar::{parse_plan, Plan, SkillGrammar};
use crate::grpo::{gradient_check, GrpoConfig, GrpoGroup, SampledResponse, StepVocab, ToyPlanPolicy};
use crate::reward::{max_weight_matching, Matching, MatchingPair};
use crate::rng::Rng;

/// Exhaustively enumerate injective matchings and keep the maximum-total one,
/// breaking ties toward the lexicographically smallest pair list.
pub fn brute_force_matching(sim: &[Vec<f64>]) -> Matching {
    let rows = sim.len();
    let cols = sim.first().map_or(0, Vec::len);

    fn canonical_total(sim: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
        let mut total = 0.0;
        for &(i, j) in pairs.iter().rev() {
            total += sim[i][j];
        }
        total
    }

    struct Best {
        total: f64,
        pairs: Vec<(usize, usize)>,
    }

    fn walk(
        sim: &[Vec<f64>],
        rows: usize,
        cols: usize,
        i: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<(usize, usize)>,
        best: &mut Best,
    ) {
        if i == rows {
            let total = canonical_total(sim, current);
            if total > best.total || (total == best.total && *current < best.pairs) {
                best.total = total;
                best.pairs = current.clone();
            }
            return;
        }
        // leave generated step i unmatched
        walk(sim, rows, cols, i + 1, used, current, best);
        for j in 0..cols {
            if !used[j] {
                used[j] = true;
                current.push((i, j));
                walk(sim, rows, cols, i + 1, used, current, best);
                current.pop();
                used[j] = false;
            }
        }
    }

    let mut best = Best {
        total: f64::NEG_INFINITY,
        pairs: vec![(usize::MAX, usize::MAX)],
    };
    // seed with the empty matching so all-zero matrices resolve to it
    let mut used = vec![false; cols];
    let mut current = Vec::new();
    best.total = 0.0;
    best.pairs = Vec::new();
    walk(sim, rows, cols, 0, &mut used, &mut current, &mut best);

    Matching {
        total_weight: best.total,
        pairs: best
            .pairs
            .into_iter()
            .map(|(i, j)| MatchingPair {
                generated: i,
                ground_truth: j,
                weight: sim[i][j],
            })
            .collect(),
    }
}

/// A solver disagreement found by the matching suite.
#[derive(Debug, Clone)]
pub struct MatchingCounterexample {
    pub matrix: Vec<Vec<f64>>,
    pub expected: Matching,
    pub got: Matching,
}

impl std::fmt::Display for MatchingCounterexample {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "matrix {:?}: expected total {} pairs {:?}, got total {} pairs {:?}",
            self.matrix,
            self.expected.total_weight,
            self.expected
                .pairs
                .iter()
                .map(|p| (p.generated, p.ground_truth))
                .collect::<Vec<_>>(),
            self.got.total_weight,
            self.got
                .pairs
                .iter()
                .map(|p| (p.generated, p.ground_truth))
                .collect::<Vec<_>>(),
        )
    }
}

fn random_matrix(m: usize, n: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let x = rng.next_f64();
                    // half the entries snap to a coarse grid to provoke ties
                    if rng.next_u64().is_multiple_of(2) {
                        (x * 20.0).round() / 20.0
                    } else {
                        x
                    }
                })
                .collect()
        })
        .collect()
}

/// Run the matching oracle suite against an arbitrary solver. Checks every
/// shape up to 7x7 with `cases_per_size` random tie-prone matrices each;
/// equality of total weight and pair list is exact.
pub fn matching_suite_with<F>(
    solve: F,
    seed: u64,
    cases_per_size: usize,
) -> Result<usize, MatchingCounterexample>
where
    F: Fn(&[Vec<f64>]) -> Matching,
{
    let mut rng = Rng::seed_from(seed);
    let mut cases = 0;
    for m in 0..=7 {
        for n in 0..=7 {
            for _ in 0..cases_per_size {
                let matrix = random_matrix(m, n, &mut rng);
                let expected = brute_force_matching(&matrix);
                let got = solve(&matrix);
                cases += 1;
                let same_pairs = expected.pairs.len() == got.pairs.len()
                    && expected
                        .pairs
                        .iter()
                        .zip(&got.pairs)
                        .all(|(a, b)| {
                            a.generated == b.generated
                                && a.ground_truth == b.ground_truth
                                && a.weight == b.weight
                        });
                if expected.total_weight != got.total_weight || !same_pairs {
                    return Err(MatchingCounterexample {
                        matrix,
                        expected,
                        got,
                    });
                }
            }
        }
    }
    Ok(cases)
}

/// [`matching_suite_with`] against the production solver.
pub fn matching_suite(seed: u64, cases_per_size: usize) -> Result<usize, MatchingCounterexample> {
    matching_suite_with(max_weight_matching, seed, cases_per_size)
}

/// Build one random gradient-check configuration clear of the clip kinks:
/// ratios either well inside or well outside the clip band.
pub fn random_gradient_case(
    grammar: &SkillGrammar,
    kl_weight: f64,
    rng: &mut Rng,
) -> (ToyPlanPolicy, GrpoGroup, GrpoConfig) {
    let vocab = StepVocab::build(
        grammar,
        &["apple".to_string(), "pen".to_string()],
        &["basket".to_string()],
    );
    let k_max = rng.range_inclusive(2, 4);
    let mut policy = ToyPlanPolicy::new(vocab, k_max);
    for row in policy.logits_mut() {
        for l in row.iter_mut() {
            *l = rng.next_f64() * 3.0 - 1.5;
        }
    }
    policy.refresh_reference();
    for row in policy.logits_mut() {
        for l in row.iter_mut() {
            *l += rng.next_f64() * 0.2 - 0.1;
        }
    }

    let group_size = rng.range_inclusive(4, 8);
    let mut group = GrpoGroup::default();
    for _ in 0..group_size {
        let (actions, logp) = policy.sample_actions(rng);
        let logp_new = policy.logp(&actions);
        // ratio offset either inside (|d| <= 0.15) or clearly outside
        // (0.3 <= |d| <= 0.5) the clip band; never near its edges
        let magnitude = if rng.next_u64().is_multiple_of(2) {
            rng.next_f64() * 0.15
        } else {
            0.3 + rng.next_f64() * 0.2
        };
        let sign = if rng.next_u64().is_multiple_of(2) { 1.0 } else { -1.0 };
        group.logp_old.push(logp_new - sign * magnitude);
        group.logp_new.push(logp_new);
        group.logp_ref.push(policy.logp_ref(&actions));
        group.rewards.push(rng.next_f64());
        group.responses.push(SampledResponse {
            actions,
            text: String::new(),
            logp,
        });
    }
    group.advantages = crate::grpo::group_advantages(&group.rewards).expect("group size >= 2");

    let cfg = GrpoConfig {
        kl_weight,
        ..GrpoConfig::default()
    };
    (policy, group, cfg)
}

#[derive(Debug, Clone, Copy)]
pub struct GradientSuiteReport {
    pub cases: usize,
    pub max_rel_error: f64,
}

/// Gradient check over random configurations cycling the KL weight through
/// 0, 0.04, and 1.
pub fn gradient_suite(seed: u64, cases: usize) -> GradientSuiteReport {
    let grammar = SkillGrammar::default_desk();
    let mut rng = Rng::seed_from(seed);
    let betas = [0.0, 0.04, 1.0];
    let mut max_rel_error = 0.0f64;
    for case in 0..cases {
        let beta = betas[case % betas.len()];
        let (policy, group, cfg) = random_gradient_case(&grammar, beta, &mut rng);
        max_rel_error = max_rel_error.max(gradient_check(&policy, &group, &cfg));
    }
    GradientSuiteReport {
        cases,
        max_rel_error,
    }
}

/// A plan that failed to survive render-then-parse.
#[derive(Debug, Clone)]
pub struct RoundtripCounterexample {
    pub rendered: String,
    pub reason: String,
}

/// Generate a random plan over the vocabulary pools.
pub fn random_plan(vocab: &StepVocab, max_len: usize, rng: &mut Rng) -> Plan {
    let len = rng.range_inclusive(0, max_len);
    Plan::new(
        (0..len)
            .map(|_| rng.choose(&vocab.candidates).step.clone())
            .collect(),
    )
}

/// Render random plans as numbered lists and parse them back; every plan must
/// survive unchanged and every step must resolve to exactly one template.
pub fn roundtrip_suite(seed: u64, cases: usize) -> Result<usize, RoundtripCounterexample> {
    let grammar = SkillGrammar::default_desk();
    let vocab = StepVocab::build(
        &grammar,
        &[
            "apple".to_string(),
            "pen".to_string(),
            "teacup".to_string(),
            "tea pot".to_string(),
            "small box".to_string(),
        ],
        &[
            "basket".to_string(),
            "tray".to_string(),
            "mouse pad".to_string(),
        ],
    );
    let mut rng = Rng::seed_from(seed);
    for _ in 0..cases {
        let plan = random_plan(&vocab, 6, &mut rng);
        let rendered = plan.render(&grammar);
        match parse_plan(&rendered, &grammar) {
            Ok(parsed) if parsed == plan => {}
            Ok(_) => {
                return Err(RoundtripCounterexample {
                    rendered,
                    reason: "parsed to a different plan".to_string(),
                })
            }
            Err(e) => {
                return Err(RoundtripCounterexample {
                    rendered,
                    reason: e.to_string(),
                })
            }
        }
    }
    Ok(cases)
}

/// One section of the selfcheck report.
#[derive(Debug, Clone)]
pub struct SectionResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Run all three suites at their default sizes.
pub fn run_all(seed: u64) -> Vec<SectionResult> {
    let mut sections = Vec::new();

    sections.push(match matching_suite(seed, 4) {
        Ok(cases) => SectionResult {
            name: "matching-oracle",
            passed: true,
            detail: format!("{cases} matrices, exact agreement"),
        },
        Err(ce) => SectionResult {
            name: "matching-oracle",
            passed: false,
            detail: ce.to_string(),
        },
    });

    let grad = gradient_suite(seed, 51);
    sections.push(SectionResult {
        name: "gradient-check",
        passed: grad.max_rel_error <= 1e-5,
        detail: format!(
            "{} cases, max relative error {:.3e}",
            grad.cases, grad.max_rel_error
        ),
    });

    sections.push(match roundtrip_suite(seed, 300) {
        Ok(cases) => SectionResult {
            name: "grammar-roundtrip",
            passed: true,
            detail: format!("{cases} plans survived render-parse"),
        },
        Err(ce) => SectionResult {
            name: "grammar-roundtrip",
            passed: false,
            detail: format!("{}: {}", ce.rendered, ce.reason),
        },
    });

    sections
}
