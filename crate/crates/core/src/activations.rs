//! Built-in neuron types: named transforms from vectors to vectors.
//!
//! A neuron's single input and single output are prefix-tree vectors whose
//! first-level keys name the arguments, so one-input/one-output transforms
//! emulate arbitrary (even variadic) arity. By convention a single unnamed
//! result goes under the output key `single`.

use std::fmt;
use std::sync::Arc;

use crate::vspace::{PTVector, Token};
use crate::EngineRng;

pub const PORT_SINGLE: &str = "single";
pub const PORT_ACCUM: &str = "accum";
pub const PORT_DELTA: &str = "delta";
pub const PORT_MASK: &str = "mask";
pub const PORT_SIGNAL: &str = "signal";
pub const PORT_DECAY: &str = "decay";

/// Registry name prefix for constant-output types.
pub const CONST_PREFIX: &str = "const:";

/// Leak factor used by `leaky` when no `decay` input is supplied.
pub const DEFAULT_LEAK: f64 = 0.9;

fn port(name: &'static str) -> Token {
    Token::new(name).expect("port names are valid tokens")
}

/// Wraps a value as a one-output result under the `single` key.
pub fn single_output(value: PTVector) -> PTVector {
    PTVector::zero().attach(&port(PORT_SINGLE), value)
}

/// Sums all arguments. With the conventional `accum`/`delta` wiring this is
/// the accumulator used by the Self neuron; any number of inputs is
/// accepted and summed.
pub fn act_add(input: &PTVector) -> PTVector {
    let sum = PTVector::linear_combination(input.children().map(|(_, sub)| (1.0, sub)));
    single_output(sum)
}

/// Passes the `single` argument through unchanged.
pub fn act_identity(input: &PTVector) -> PTVector {
    single_output(input.subtree(&port(PORT_SINGLE)).clone())
}

/// Leaky accumulator: `single ← λ·single + delta`, where λ is the scalar of
/// the optional `decay` input ([`DEFAULT_LEAK`] when absent).
pub fn act_leaky(input: &PTVector) -> PTVector {
    let decay = input.subtree(&port(PORT_DECAY));
    let lambda = if decay.is_zero() {
        DEFAULT_LEAK
    } else {
        decay.scalar()
    };
    let kept = input.subtree(&port(PORT_SINGLE));
    let delta = input.subtree(&port(PORT_DELTA));
    single_output(PTVector::linear_combination([(lambda, kept), (1.0, delta)]))
}

/// Multiplicative gate: scales the `signal` argument by the scalar component
/// of the `mask` argument.
pub fn act_multiply(input: &PTVector) -> PTVector {
    let gate = input.subtree(&port(PORT_MASK)).scalar();
    single_output(input.subtree(&port(PORT_SIGNAL)).scale(gate))
}

/// Elementwise tanh over the nonzero coefficients of the `single` argument.
pub fn act_tanh(input: &PTVector) -> PTVector {
    single_output(
        input
            .subtree(&port(PORT_SINGLE))
            .map_coefficients(f64::tanh),
    )
}

/// Elementwise logistic sigmoid over the nonzero coefficients of the
/// `single` argument. Absent (zero) coordinates stay zero: only coefficients
/// structurally present in the sparse tree are mapped.
pub fn act_sigmoid(input: &PTVector) -> PTVector {
    single_output(
        input
            .subtree(&port(PORT_SINGLE))
            .map_coefficients(|x| 1.0 / (1.0 + (-x).exp())),
    )
}

type TransformFn = dyn Fn(&PTVector, &mut EngineRng) -> PTVector + Send + Sync;

/// A named activation transform. Transforms are total on canonical vectors
/// and must produce canonical vectors; the built-ins ignore the random
/// source, which exists for stochastic extensions.
#[derive(Clone)]
pub struct NeuronType {
    name: String,
    transform: Arc<TransformFn>,
}

impl NeuronType {
    pub fn new(
        name: impl Into<String>,
        transform: impl Fn(&PTVector, &mut EngineRng) -> PTVector + Send + Sync + 'static,
    ) -> Self {
        NeuronType {
            name: name.into(),
            transform: Arc::new(transform),
        }
    }

    pub fn pure(
        name: impl Into<String>,
        transform: impl Fn(&PTVector) -> PTVector + Send + Sync + 'static,
    ) -> Self {
        Self::new(name, move |v, _| transform(v))
    }

    /// A type that ignores its input and emits `{single: value}`.
    pub fn constant(name: impl Into<String>, value: PTVector) -> Self {
        let output = single_output(value);
        Self::new(name, move |_, _| output.clone())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn apply(&self, input: &PTVector, rng: &mut EngineRng) -> PTVector {
        (self.transform)(input, rng)
    }
}

impl fmt::Debug for NeuronType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NeuronType")
            .field("name", &self.name)
            .finish()
    }
}

/// Lookup table from type names to transforms. Fixed for the lifetime of an
/// engine once loading completes.
#[derive(Debug, Clone, Default)]
pub struct NeuronTypeRegistry {
    types: std::collections::BTreeMap<String, NeuronType>,
}

impl NeuronTypeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// All deterministic built-ins: `add`, `identity`, `leaky`, `multiply`,
    /// `tanh`, `sigmoid`.
    pub fn with_builtins() -> Self {
        let mut registry = Self::new();
        registry.register(NeuronType::pure("add", act_add));
        registry.register(NeuronType::pure("identity", act_identity));
        registry.register(NeuronType::pure("leaky", act_leaky));
        registry.register(NeuronType::pure("multiply", act_multiply));
        registry.register(NeuronType::pure("tanh", act_tanh));
        registry.register(NeuronType::pure("sigmoid", act_sigmoid));
        registry
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["add", "identity", "leaky", "multiply", "tanh", "sigmoid"]
    }

    pub fn register(&mut self, neuron_type: NeuronType) {
        self.types.insert(neuron_type.name.clone(), neuron_type);
    }

    /// Registers a constant type under the name `const:<name>`.
    pub fn register_constant(&mut self, name: &str, value: PTVector) -> String {
        let full = format!("{CONST_PREFIX}{name}");
        self.register(NeuronType::constant(full.clone(), value));
        full
    }

    pub fn get(&self, name: &str) -> Option<&NeuronType> {
        self.types.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.types.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.types.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vspace::Path;
    use rand::SeedableRng;

    fn path(parts: &[&str]) -> Path {
        Path::from_strs(parts).unwrap()
    }

    fn named(entries: &[(&str, &[(&[&str], f64)])]) -> PTVector {
        let mut out = PTVector::zero();
        for (name, terms) in entries {
            let sub = PTVector::from_terms(terms.iter().map(|(p, c)| (path(p), *c)));
            out = out.attach(&Token::new(*name).unwrap(), sub);
        }
        out
    }

    #[test]
    fn add_sums_all_arguments() {
        let input = named(&[("accum", &[(&["a"], 1.0)]), ("delta", &[(&["a"], 2.0)])]);
        assert_eq!(act_add(&input), named(&[("single", &[(&["a"], 3.0)])]));

        let single = named(&[("accum", &[(&["a"], 1.0)])]);
        assert_eq!(act_add(&single), named(&[("single", &[(&["a"], 1.0)])]));

        assert!(act_add(&PTVector::zero()).is_zero());

        // variadic: a third argument joins the sum
        let three = named(&[
            ("accum", &[(&["a"], 1.0)]),
            ("delta", &[(&["a"], 2.0)]),
            ("more", &[(&["b"], 5.0)]),
        ]);
        assert_eq!(
            act_add(&three),
            named(&[("single", &[(&["a"], 3.0), (&["b"], 5.0)])])
        );
    }

    #[test]
    fn identity_passes_single_through() {
        let input = named(&[("single", &[(&["a"], 1.0)])]);
        assert_eq!(act_identity(&input), input);
        assert!(act_identity(&PTVector::zero()).is_zero());

        let deep = named(&[("single", &[(&["a", "b", "c", "d", "e"], 2.5)])]);
        assert_eq!(act_identity(&deep), deep);
    }

    #[test]
    fn leaky_applies_decay() {
        let input = named(&[("single", &[(&["a"], 1.0)]), ("delta", &[(&["a"], 1.0)])]);
        let out = act_leaky(&input);
        assert!((out.coefficient(&path(&["single", "a"])) - 1.9).abs() < 1e-15);

        let fresh = named(&[("delta", &[(&["a"], 1.0)])]);
        assert_eq!(act_leaky(&fresh), named(&[("single", &[(&["a"], 1.0)])]));
    }

    #[test]
    fn leaky_decays_geometrically() {
        // with zero delta the coefficient after k steps is λ^k times the start
        let mut state = named(&[("single", &[(&["a"], 1.0)])]);
        for k in 1..=20 {
            state = act_leaky(&state);
            let got = state.coefficient(&path(&["single", "a"]));
            assert!((got - DEFAULT_LEAK.powi(k)).abs() < 1e-12, "k={k}");
            // wire the output back as next step's `single` input
            state = named(&[]).attach(
                &Token::new("single").unwrap(),
                state.subtree(&Token::new("single").unwrap()).clone(),
            );
        }
    }

    #[test]
    fn leaky_honors_decay_input() {
        let input = named(&[
            ("single", &[(&["a"], 2.0)]),
            ("delta", &[(&["a"], 1.0)]),
            ("decay", &[(&[], 0.5)]),
        ]);
        assert_eq!(act_leaky(&input), named(&[("single", &[(&["a"], 2.0)])]));
    }

    #[test]
    fn multiply_gates_by_mask_scalar() {
        let silenced = named(&[("mask", &[(&[], 0.0)]), ("signal", &[(&["a"], 5.0)])]);
        assert!(act_multiply(&silenced).is_zero());

        let open = named(&[("mask", &[(&[], 1.0)]), ("signal", &[(&["a"], 5.0)])]);
        assert_eq!(act_multiply(&open), named(&[("single", &[(&["a"], 5.0)])]));

        let half = named(&[
            ("mask", &[(&[], 0.5)]),
            ("signal", &[(&["a"], 4.0), (&["b"], -2.0)]),
        ]);
        assert_eq!(
            act_multiply(&half),
            named(&[("single", &[(&["a"], 2.0), (&["b"], -1.0)])])
        );
    }

    #[test]
    fn tanh_maps_leaves() {
        let zeroed = named(&[("single", &[(&["a"], 0.0)])]);
        assert!(act_tanh(&zeroed).is_zero());

        let saturated = named(&[("single", &[(&[], 1000.0)])]);
        let out = act_tanh(&saturated);
        assert!((out.coefficient(&path(&["single"])) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tanh_matches_flat_oracle() {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let alphabet = ["a", "b", "c", "d"];
        let sub = PTVector::from_terms((0..20).map(|_| {
            let len = rng.random_range(0..=3);
            let tokens = (0..len)
                .map(|_| Token::new(alphabet[rng.random_range(0..4)]).unwrap())
                .collect::<Vec<_>>();
            (Path::new(tokens), rng.random_range(-3.0..3.0))
        }));
        let input = PTVector::zero().attach(&Token::new("single").unwrap(), sub.clone());
        let out = act_tanh(&input);
        for (p, c) in sub.terms() {
            let mut full = vec![Token::new("single").unwrap()];
            full.extend(p.tokens().iter().cloned());
            assert!((out.coefficient(&Path::new(full)) - c.tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_maps_present_coefficients() {
        let input = named(&[("single", &[(&["a"], 0.5)])]);
        let out = act_sigmoid(&input);
        let expected = 1.0 / (1.0 + (-0.5f64).exp());
        assert!((out.coefficient(&path(&["single", "a"])) - expected).abs() < 1e-15);
        // absent coordinates stay absent
        assert_eq!(out.coefficient(&path(&["single", "b"])), 0.0);
    }

    #[test]
    fn constant_type_ignores_input() {
        let mut rng = EngineRng::seed_from_u64(0);
        let value = PTVector::from_terms([(path(&["a"]), 1.0)]);
        let nt = NeuronType::constant("const:u", value.clone());
        let expected = named(&[("single", &[(&["a"], 1.0)])]);
        assert_eq!(nt.apply(&PTVector::zero(), &mut rng), expected);
        assert_eq!(nt.apply(&expected, &mut rng), expected);
        // applied twice, outputs identical
        assert_eq!(
            nt.apply(&PTVector::zero(), &mut rng),
            nt.apply(&PTVector::zero(), &mut rng)
        );

        let zero_const = NeuronType::constant("const:z", PTVector::zero());
        assert!(zero_const.apply(&expected, &mut rng).is_zero());
    }

    #[test]
    fn registry_lookup() {
        let mut registry = NeuronTypeRegistry::with_builtins();
        for name in NeuronTypeRegistry::builtin_names() {
            assert!(registry.contains(name), "{name}");
        }
        assert!(!registry.contains("nope"));
        let full = registry.register_constant("u2", PTVector::from_scalar(1.0));
        assert_eq!(full, "const:u2");
        assert!(registry.get("const:u2").is_some());
    }

    mod laws {
        use super::*;
        use proptest::prelude::*;

        fn arb_token() -> impl Strategy<Value = Token> {
            prop::sample::select(vec!["a", "b", "c"]).prop_map(|s| Token::new(s).unwrap())
        }

        fn arb_coeff() -> impl Strategy<Value = f64> {
            (0.25f64..4.0, prop::bool::ANY).prop_map(|(m, neg)| if neg { -m } else { m })
        }

        prop_compose! {
            fn arb_vector()(terms in prop::collection::vec(
                (prop::collection::vec(arb_token(), 0..=3), arb_coeff()), 0..8
            )) -> PTVector {
                PTVector::from_terms(terms.into_iter().map(|(t, c)| (Path::new(t), c)))
            }
        }

        fn max_delta(u: &PTVector, w: &PTVector) -> f64 {
            let mut acc: std::collections::BTreeMap<Path, f64> = u.terms().into_iter().collect();
            for (p, c) in w.terms() {
                *acc.entry(p).or_insert(0.0) -= c;
            }
            acc.values().fold(0.0, |m, c| m.max(c.abs()))
        }

        proptest! {
            #[test]
            fn add_is_linear(a in arb_coeff(), b in arb_coeff(), u in arb_vector(), w in arb_vector()) {
                let mixed = PTVector::linear_combination([(a, &u), (b, &w)]);
                let lhs = act_add(&mixed);
                let rhs = PTVector::linear_combination([(a, &act_add(&u)), (b, &act_add(&w))]);
                prop_assert!(max_delta(&lhs, &rhs) < 1e-12);
            }

            #[test]
            fn identity_is_linear(a in arb_coeff(), b in arb_coeff(), u in arb_vector(), w in arb_vector()) {
                let mixed = PTVector::linear_combination([(a, &u), (b, &w)]);
                let lhs = act_identity(&mixed);
                let rhs = PTVector::linear_combination([(a, &act_identity(&u)), (b, &act_identity(&w))]);
                prop_assert!(max_delta(&lhs, &rhs) < 1e-12);
            }

            #[test]
            fn multiply_is_bilinear(g in arb_coeff(), a in arb_coeff(), u in arb_vector(), w in arb_vector()) {
                let gate = PTVector::from_scalar(g);
                let build = |signal: &PTVector| {
                    PTVector::zero()
                        .attach(&Token::new(PORT_MASK).unwrap(), gate.clone())
                        .attach(&Token::new(PORT_SIGNAL).unwrap(), signal.clone())
                };
                // linear in the signal
                let mixed = PTVector::linear_combination([(a, &u), (1.0, &w)]);
                let lhs = act_multiply(&build(&mixed));
                let rhs = PTVector::linear_combination([
                    (a, &act_multiply(&build(&u))),
                    (1.0, &act_multiply(&build(&w))),
                ]);
                prop_assert!(max_delta(&lhs, &rhs) < 1e-11);
                // linear in the gate scalar
                let gate2 = PTVector::from_scalar(g * a);
                let scaled_gate = PTVector::zero()
                    .attach(&Token::new(PORT_MASK).unwrap(), gate2)
                    .attach(&Token::new(PORT_SIGNAL).unwrap(), u.clone());
                prop_assert!(max_delta(&act_multiply(&scaled_gate), &act_multiply(&build(&u)).scale(a)) < 1e-11);
            }

            #[test]
            fn builtins_are_total_and_pure(u in arb_vector()) {
                for f in [act_add, act_identity, act_leaky, act_multiply, act_tanh, act_sigmoid] {
                    let once = f(&u);
                    let twice = f(&u);
                    prop_assert_eq!(&once, &twice);
                    prop_assert!(once.is_canonical(crate::vspace::DEFAULT_EPSILON));
                }
            }
        }
    }
}
