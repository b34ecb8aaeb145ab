//! Payoff-model properties checked against an independent oracle and across
//! randomly generated instances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use popgame_core::game::{Scenario, SocialState};
use popgame_core::generate;

/// Term-by-term transcription of the sensing/energy/reward closed forms,
/// written independently of the library's evaluation path. No denominator
/// floors: callers must keep selector masses well away from zero.
fn oracle_payoff(
    scenario: &Scenario,
    state: &SocialState,
    p: usize,
    pos: usize,
) -> f64 {
    let pop = &scenario.populations()[p];
    let m = pop.strategy_set[pos];
    let region = &scenario.regions()[m];

    let mut mass = 0.0;
    let mut quality_mass = 0.0;
    for (q, other) in scenario.populations().iter().enumerate() {
        for (opos, &om) in other.strategy_set.iter().enumerate() {
            if om == m {
                let w = state.block(q)[opos] * other.size as f64;
                mass += w;
                quality_mass += w * other.data_quality[opos];
            }
        }
    }
    let sensing_distance = region.route_length_m / mass;
    let energy = pop.propulsion_power_w * pop.traversal_distance_m[pos] / pop.traversal_speed
        + pop.hover_power_w * sensing_distance / pop.sensing_speed;
    let reward = pop.data_quality[pos] * region.reward_pool / quality_mass;
    reward - pop.unit_energy_cost * energy
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

#[test]
fn payoff_table_matches_the_independent_oracle_on_the_default_scenario() {
    let g = generate::scenario(generate::DEFAULT_SEED, 3, 3).unwrap();
    let state = &g.initial_state;
    let table = g.scenario.payoff_table(state);
    for p in 0..3 {
        for pos in 0..3 {
            let expected = oracle_payoff(&g.scenario, state, p, pos);
            let got = table.payoffs(p)[pos];
            assert!(
                relative_gap(got, expected) < 1e-9,
                "population {p}, strategy {pos}: {got} vs oracle {expected}"
            );
        }
        let average: f64 = table
            .payoffs(p)
            .iter()
            .zip(state.block(p))
            .map(|(pi, x)| pi * x)
            .sum();
        assert!(
            relative_gap(average, table.average(p)) < 1e-9,
            "population {p}: stored average {} vs recomputed {average}",
            table.average(p)
        );
    }
}

#[test]
fn payoff_table_matches_the_oracle_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xFEED);
    for seed in 0..100 {
        let g = generate::scenario(seed, 1 + (seed as usize % 4), 2 + (seed as usize % 3))
            .unwrap();
        let state = generate::random_state(&g.scenario, &mut rng);
        // Keep the floor inactive so the oracle's unfloored formulas apply.
        if !all_masses_clear_of_floor(&g.scenario, &state) {
            continue;
        }
        let table = g.scenario.payoff_table(&state);
        for (p, pop) in g.scenario.populations().iter().enumerate() {
            for pos in 0..pop.strategy_set.len() {
                let expected = oracle_payoff(&g.scenario, &state, p, pos);
                let got = table.payoffs(p)[pos];
                assert!(
                    relative_gap(got, expected) < 1e-9,
                    "seed {seed}, population {p}, strategy {pos}: {got} vs {expected}"
                );
            }
        }
    }
}

fn all_masses_clear_of_floor(scenario: &Scenario, state: &SocialState) -> bool {
    (0..scenario.regions().len()).all(|m| {
        let mass = scenario.effective_selector_mass(state, m).unwrap();
        mass > 10.0 * scenario.denominator_floor() * scenario.total_size()
    })
}

#[test]
fn rewards_are_conserved_region_by_region() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let mut checked = 0usize;
    for seed in 0..250 {
        let g = generate::scenario(seed, 3, 3).unwrap();
        for _ in 0..4 {
            let state = generate::random_state(&g.scenario, &mut rng);
            if !all_masses_clear_of_floor(&g.scenario, &state) {
                continue;
            }
            for (m, region) in g.scenario.regions().iter().enumerate() {
                let mut paid = 0.0;
                for (p, pop) in g.scenario.populations().iter().enumerate() {
                    if let Some(pos) = g.scenario.strategy_position(p, m) {
                        let share = g.scenario.reward_share(&state, p, m).unwrap();
                        paid += state.block(p)[pos] * pop.size as f64 * share;
                    }
                }
                assert!(
                    relative_gap(paid, region.reward_pool) < 1e-6,
                    "seed {seed}, region {m}: paid {paid} of pool {}",
                    region.reward_pool
                );
            }
            checked += 1;
        }
    }
    assert!(checked > 900, "only {checked} states checked");
}

#[test]
fn crowding_weakly_lowers_reward_share_and_sensing_distance() {
    let g = generate::scenario(11, 2, 3).unwrap();
    let scenario = &g.scenario;
    let lean = SocialState::new(
        vec![vec![0.2, 0.4, 0.4], vec![0.3, 0.3, 0.4]],
        scenario,
    )
    .unwrap();
    let crowded = SocialState::new(
        vec![vec![0.6, 0.2, 0.2], vec![0.3, 0.3, 0.4]],
        scenario,
    )
    .unwrap();
    for p in 0..2 {
        let share_lean = scenario.reward_share(&lean, p, 0).unwrap();
        let share_crowded = scenario.reward_share(&crowded, p, 0).unwrap();
        assert!(
            share_crowded < share_lean,
            "population {p}: share rose with crowding ({share_lean} -> {share_crowded})"
        );
    }
    let d_lean = scenario.sensing_distance(&lean, 0, 0).unwrap();
    let d_crowded = scenario.sensing_distance(&crowded, 0, 0).unwrap();
    assert!(d_crowded < d_lean);
}

#[test]
fn higher_quality_population_earns_strictly_more() {
    let g = generate::scenario(17, 2, 3).unwrap();
    let mut pops = g.scenario.populations().to_vec();
    pops[1] = pops[0].clone();
    pops[1].data_quality = pops[0].data_quality.iter().map(|b| b * 1.5).collect();
    let scenario = Scenario::new(g.scenario.regions().to_vec(), pops, 1e-6).unwrap();
    let state = SocialState::uniform(&scenario);
    for m in 0..3 {
        let low = scenario.reward_share(&state, 0, m).unwrap();
        let high = scenario.reward_share(&state, 1, m).unwrap();
        assert!(
            high > low,
            "region {m}: higher quality did not earn more ({high} <= {low})"
        );
    }
}
