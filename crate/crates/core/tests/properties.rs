mod common;

const CASES: u32 = 1000;

macro_rules! properties {
    ($($name:ident),* $(,)?) => {
        $(
            #[test]
            fn $name() {
                if let Err(e) = common::$name(CASES) {
                    panic!("{e}");
                }
            }
        )*
    };
}

properties!(
    rate_orderings,
    monotonicity,
    exchange_symmetry,
    efficiency_bounds,
    gating_soundness,
    step_halving,
    element_round_trip,
    los_symmetry,
    config_round_trip,
    csv_round_trip,
    oracle_determinism,
    closed_form_vs_sum,
);
