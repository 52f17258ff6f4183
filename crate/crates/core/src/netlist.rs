//! Line-oriented circuit description (`.lo` files).
//!
//! ```text
//! # comment
//! MODES 4
//! NAME chip
//! INPUTS a b c d
//! OUTPUTS g e f h
//! DC 0 3 1/2
//! PS 3 $phi
//! ```
//!
//! `MODES` must be the first directive. `DC` takes two distinct modes and a
//! reflectivity written as a decimal or as `p/q`. `PS` takes a mode and
//! either a literal phase in radians or `$name`, which declares a phase
//! parameter bound at elaboration time. `INPUTS`/`OUTPUTS` optionally name
//! the modes; unnamed modes are labelled by their index.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::circuit::{
    compose, coupler_matrix, embed, phase_matrix, CircuitError, CouplerParams, PhaseSetting,
    TransitionMatrix,
};

/// The bundled four-mode chip.
pub const CHIP_NETLIST: &str = include_str!("../netlists/chip.lo");

/// Largest mode count accepted by the parser.
pub const MAX_MODES: usize = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetlistError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("binding error: {0}")]
    Binding(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

impl NetlistError {
    fn parse(line: usize, message: impl Into<String>) -> Self {
        NetlistError::Parse {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhaseValue {
    Literal(f64),
    Param(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    Coupler { modes: [usize; 2], eta: f64 },
    Phase { mode: usize, value: PhaseValue },
}

impl Element {
    pub fn modes(&self) -> Vec<usize> {
        match self {
            Element::Coupler { modes, .. } => modes.to_vec(),
            Element::Phase { mode, .. } => vec![*mode],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec {
    pub name: Option<String>,
    pub mode_count: usize,
    pub elements: Vec<Element>,
    /// Parameter names in order of first appearance.
    pub phase_params: Vec<String>,
    pub input_labels: Option<Vec<String>>,
    pub output_labels: Option<Vec<String>>,
}

impl CircuitSpec {
    pub fn empty(mode_count: usize) -> Self {
        Self {
            name: None,
            mode_count,
            elements: Vec::new(),
            phase_params: Vec::new(),
            input_labels: None,
            output_labels: None,
        }
    }

    pub fn inputs(&self) -> Vec<String> {
        labels_or_indices(&self.input_labels, self.mode_count)
    }

    pub fn outputs(&self) -> Vec<String> {
        labels_or_indices(&self.output_labels, self.mode_count)
    }

    pub fn input_mode(&self, label: &str) -> Option<usize> {
        self.inputs().iter().position(|l| l == label)
    }

    pub fn output_mode(&self, label: &str) -> Option<usize> {
        self.outputs().iter().position(|l| l == label)
    }
}

fn labels_or_indices(labels: &Option<Vec<String>>, n: usize) -> Vec<String> {
    match labels {
        Some(l) => l.clone(),
        None => (0..n).map(|i| i.to_string()).collect(),
    }
}

impl fmt::Display for CircuitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "MODES {}", self.mode_count)?;
        if let Some(name) = &self.name {
            writeln!(f, "NAME {name}")?;
        }
        if let Some(l) = &self.input_labels {
            writeln!(f, "INPUTS {}", l.join(" "))?;
        }
        if let Some(l) = &self.output_labels {
            writeln!(f, "OUTPUTS {}", l.join(" "))?;
        }
        for e in &self.elements {
            match e {
                Element::Coupler { modes, eta } => {
                    writeln!(f, "DC {} {} {}", modes[0], modes[1], eta)?
                }
                Element::Phase { mode, value } => match value {
                    PhaseValue::Literal(v) => writeln!(f, "PS {mode} {v}")?,
                    PhaseValue::Param(p) => writeln!(f, "PS {mode} ${p}")?,
                },
            }
        }
        Ok(())
    }
}

/// Values for a circuit's phase parameters, in radians.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamBinding(pub BTreeMap<String, f64>);

impl ParamBinding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }
}

/// Parses a decimal or `p/q` literal into a finite real.
pub fn parse_number(tok: &str) -> Option<f64> {
    let value = match tok.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.parse().ok()?;
            let q: f64 = q.parse().ok()?;
            if q == 0.0 {
                return None;
            }
            p / q
        }
        None => tok.parse().ok()?,
    };
    value.is_finite().then_some(value)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_label(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

pub fn parse_netlist(text: &str) -> Result<CircuitSpec, NetlistError> {
    let mut spec: Option<CircuitSpec> = None;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let Some((&directive, args)) = tokens.split_first() else {
            continue;
        };

        let Some(spec) = spec.as_mut() else {
            if directive != "MODES" {
                return Err(NetlistError::parse(
                    line_no,
                    format!("expected MODES before '{directive}'"),
                ));
            }
            let [n] = args else {
                return Err(NetlistError::parse(line_no, "MODES takes one argument"));
            };
            let n: usize = n
                .parse()
                .map_err(|_| NetlistError::parse(line_no, format!("invalid mode count '{n}'")))?;
            if n == 0 || n > MAX_MODES {
                return Err(NetlistError::parse(
                    line_no,
                    format!("mode count must be in 1..={MAX_MODES}"),
                ));
            }
            spec = Some(CircuitSpec::empty(n));
            continue;
        };

        let mode = |tok: &str| -> Result<usize, NetlistError> {
            let m: usize = tok
                .parse()
                .map_err(|_| NetlistError::parse(line_no, format!("invalid mode index '{tok}'")))?;
            if m >= spec.mode_count {
                return Err(NetlistError::parse(
                    line_no,
                    format!("mode {m} out of range for {} modes", spec.mode_count),
                ));
            }
            Ok(m)
        };

        match directive {
            "MODES" => return Err(NetlistError::parse(line_no, "duplicate MODES directive")),
            "NAME" => {
                if spec.name.is_some() {
                    return Err(NetlistError::parse(line_no, "duplicate NAME directive"));
                }
                if args.is_empty() {
                    return Err(NetlistError::parse(line_no, "NAME needs a label"));
                }
                spec.name = Some(args.join(" "));
            }
            "INPUTS" | "OUTPUTS" => {
                let labels = parse_labels(line_no, directive, args, spec.mode_count)?;
                let slot = if directive == "INPUTS" {
                    &mut spec.input_labels
                } else {
                    &mut spec.output_labels
                };
                if slot.is_some() {
                    return Err(NetlistError::parse(
                        line_no,
                        format!("duplicate {directive} directive"),
                    ));
                }
                *slot = Some(labels);
            }
            "DC" => {
                let [m1, m2, eta] = args else {
                    return Err(NetlistError::parse(line_no, "DC takes <m1> <m2> <eta>"));
                };
                let (m1, m2) = (mode(m1)?, mode(m2)?);
                if m1 == m2 {
                    return Err(NetlistError::parse(line_no, "DC modes must differ"));
                }
                let eta_val = parse_number(eta).ok_or_else(|| {
                    NetlistError::parse(line_no, format!("invalid reflectivity '{eta}'"))
                })?;
                if !(0.0..=1.0).contains(&eta_val) {
                    return Err(NetlistError::parse(
                        line_no,
                        format!("reflectivity {eta_val} outside [0, 1]"),
                    ));
                }
                spec.elements.push(Element::Coupler {
                    modes: [m1, m2],
                    eta: eta_val,
                });
            }
            "PS" => {
                let [m, value] = args else {
                    return Err(NetlistError::parse(
                        line_no,
                        "PS takes <m> <value-or-$name>",
                    ));
                };
                let m = mode(m)?;
                let value = if let Some(name) = value.strip_prefix('$') {
                    if !is_identifier(name) {
                        return Err(NetlistError::parse(
                            line_no,
                            format!("invalid parameter name '${name}'"),
                        ));
                    }
                    if !spec.phase_params.iter().any(|p| p == name) {
                        spec.phase_params.push(name.to_string());
                    }
                    PhaseValue::Param(name.to_string())
                } else if let Some(v) = parse_number(value) {
                    PhaseValue::Literal(v)
                } else if is_identifier(value) {
                    return Err(NetlistError::parse(
                        line_no,
                        format!("undeclared parameter '{value}' (parameters are written ${value})"),
                    ));
                } else {
                    return Err(NetlistError::parse(
                        line_no,
                        format!("invalid phase '{value}'"),
                    ));
                };
                spec.elements.push(Element::Phase { mode: m, value });
            }
            other => {
                return Err(NetlistError::parse(
                    line_no,
                    format!("unknown directive '{other}'"),
                ))
            }
        }
    }

    spec.ok_or_else(|| NetlistError::parse(last_line.max(1), "missing MODES directive"))
}

fn parse_labels(
    line_no: usize,
    directive: &str,
    args: &[&str],
    mode_count: usize,
) -> Result<Vec<String>, NetlistError> {
    if args.len() != mode_count {
        return Err(NetlistError::parse(
            line_no,
            format!("{directive} needs {mode_count} labels, got {}", args.len()),
        ));
    }
    let mut seen = BTreeSet::new();
    for label in args {
        if !is_label(label) {
            return Err(NetlistError::parse(
                line_no,
                format!("invalid label '{label}'"),
            ));
        }
        if !seen.insert(*label) {
            return Err(NetlistError::parse(
                line_no,
                format!("duplicate label '{label}'"),
            ));
        }
    }
    Ok(args.iter().map(|s| s.to_string()).collect())
}

/// Builds the circuit's transition matrix with `binding` supplying every
/// phase parameter.
pub fn elaborate(
    spec: &CircuitSpec,
    binding: &ParamBinding,
) -> Result<TransitionMatrix, NetlistError> {
    for name in &spec.phase_params {
        if !binding.0.contains_key(name) {
            return Err(NetlistError::Binding(format!("missing parameter '{name}'")));
        }
    }
    if let Some(extra) = binding.0.keys().find(|k| !spec.phase_params.contains(k)) {
        return Err(NetlistError::Binding(format!(
            "unknown parameter '{extra}'"
        )));
    }

    let dim = spec.mode_count;
    let mut stages = Vec::with_capacity(spec.elements.len() + 1);
    stages.push(TransitionMatrix::identity(dim));
    for elem in &spec.elements {
        let m = match elem {
            Element::Coupler { modes, eta } => {
                embed(&coupler_matrix(CouplerParams::new(*eta)?), modes, dim)?
            }
            Element::Phase { mode, value } => {
                let phi = match value {
                    PhaseValue::Literal(v) => *v,
                    PhaseValue::Param(p) => binding.0[p],
                };
                let setting =
                    PhaseSetting::new(phi).map_err(|e| NetlistError::Binding(e.to_string()))?;
                embed(&phase_matrix(setting), &[*mode], dim)?
            }
        };
        stages.push(m);
    }
    Ok(compose(&stages)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{chip, chip_unitary, output_distribution, UNITARY_TOL};
    use std::f64::consts::PI;

    fn parse_err_line(text: &str) -> usize {
        match parse_netlist(text) {
            Err(NetlistError::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn single_coupler() {
        let spec = parse_netlist("MODES 2\nDC 0 1 0.5").unwrap();
        assert_eq!(spec.mode_count, 2);
        assert_eq!(
            spec.elements,
            vec![Element::Coupler {
                modes: [0, 1],
                eta: 0.5
            }]
        );
        assert!(spec.phase_params.is_empty());
    }

    #[test]
    fn bundled_chip() {
        let spec = parse_netlist(CHIP_NETLIST).unwrap();
        assert_eq!(spec.mode_count, 4);
        assert_eq!(spec.elements.len(), 5);
        assert_eq!(spec.phase_params, vec!["phi".to_string()]);
        assert_eq!(spec.name.as_deref(), Some("chip"));
        let etas: Vec<f64> = spec
            .elements
            .iter()
            .filter_map(|e| match e {
                Element::Coupler { eta, .. } => Some(*eta),
                _ => None,
            })
            .collect();
        assert_eq!(etas, vec![0.5, 1.0 / 3.0, 1.0 / 3.0, 0.5]);
        assert_eq!(spec.input_mode("a"), Some(chip::INPUT_A));
        for (label, idx) in [
            ("e", chip::OUTPUT_E),
            ("f", chip::OUTPUT_F),
            ("g", chip::OUTPUT_G),
            ("h", chip::OUTPUT_H),
        ] {
            assert_eq!(spec.output_mode(label), Some(idx));
        }
    }

    #[test]
    fn error_lines() {
        assert_eq!(parse_err_line("MODES 2\nDC 0 3 0.5"), 2);
        assert_eq!(parse_err_line("# header\n\nMODES 2\nMODES 3"), 4);
        assert_eq!(parse_err_line("MODES 2\nBS 0 1 0.5"), 2);
        assert_eq!(parse_err_line("MODES 2\nDC 0 1 1.5"), 2);
        assert_eq!(parse_err_line("MODES 2\nDC 0 1 3/2"), 2);
        assert_eq!(parse_err_line("MODES 2\nDC 0 1 1/0"), 2);
        assert_eq!(parse_err_line("MODES 2\nDC 1 1 0.5"), 2);
        assert_eq!(parse_err_line("MODES 2\nPS 0 phi"), 2);
        assert_eq!(parse_err_line("MODES 2\nPS 0 $"), 2);
        assert_eq!(parse_err_line("MODES 2\nPS 0 nan"), 2);
        assert_eq!(parse_err_line("DC 0 1 0.5\nMODES 2"), 1);
        assert_eq!(parse_err_line("MODES 0"), 1);
        assert_eq!(parse_err_line("MODES 2\nOUTPUTS x x"), 2);
        assert_eq!(parse_err_line("MODES 2\nOUTPUTS x"), 2);
        assert_eq!(parse_err_line(""), 1);
        assert_eq!(parse_err_line("# only\n# comments"), 2);
    }

    #[test]
    fn comments_and_fractions() {
        let spec =
            parse_netlist("  # lead\nMODES 3 # three\n\nDC 1 2 1/3 # tap\nPS 2 -1.5").unwrap();
        assert_eq!(
            spec.elements,
            vec![
                Element::Coupler {
                    modes: [1, 2],
                    eta: 1.0 / 3.0
                },
                Element::Phase {
                    mode: 2,
                    value: PhaseValue::Literal(-1.5)
                }
            ]
        );
    }

    #[test]
    fn elaborate_chip_matches_direct_construction() {
        let spec = parse_netlist(CHIP_NETLIST).unwrap();
        let u = elaborate(&spec, &ParamBinding::new().with("phi", PI / 2.0)).unwrap();
        let direct = chip_unitary(PhaseSetting::new(PI / 2.0).unwrap(), chip::DESIGN_ETAS).unwrap();
        assert!(u.max_abs_diff(&direct).unwrap() < 1e-12);

        let u0 = elaborate(&spec, &ParamBinding::new().with("phi", 0.0)).unwrap();
        let p = output_distribution(&u0, chip::INPUT_A)
            .unwrap()
            .probabilities;
        assert!((p[chip::OUTPUT_E] - 1.0 / 3.0).abs() < 1e-12);
        assert!((p[chip::OUTPUT_F] - 1.0 / 3.0).abs() < 1e-12);
        assert!(p[chip::OUTPUT_G].abs() < 1e-12);
        assert!((p[chip::OUTPUT_H] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn elaborate_empty_is_identity() {
        let spec = parse_netlist("MODES 3").unwrap();
        let u = elaborate(&spec, &ParamBinding::new()).unwrap();
        assert_eq!(u, TransitionMatrix::identity(3));
    }

    #[test]
    fn binding_errors() {
        let spec = parse_netlist(CHIP_NETLIST).unwrap();
        assert!(matches!(
            elaborate(&spec, &ParamBinding::new()),
            Err(NetlistError::Binding(_))
        ));
        assert!(matches!(
            elaborate(
                &spec,
                &ParamBinding::new().with("phi", 0.0).with("theta", 1.0)
            ),
            Err(NetlistError::Binding(_))
        ));
        assert!(matches!(
            elaborate(&spec, &ParamBinding::new().with("phi", f64::NAN)),
            Err(NetlistError::Binding(_))
        ));
    }

    #[test]
    fn shared_parameter_declared_once() {
        let spec = parse_netlist("MODES 2\nPS 0 $a\nPS 1 $b\nPS 1 $a").unwrap();
        assert_eq!(spec.phase_params, vec!["a".to_string(), "b".to_string()]);
        let u = elaborate(&spec, &ParamBinding::new().with("a", 0.3).with("b", 0.1)).unwrap();
        assert!(u.is_unitary(UNITARY_TOL));
        assert!((u.get(1, 1).arg() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn display_round_trips_chip() {
        let spec = parse_netlist(CHIP_NETLIST).unwrap();
        assert_eq!(parse_netlist(&spec.to_string()).unwrap(), spec);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_spec() -> impl Strategy<Value = CircuitSpec> {
            (2usize..10).prop_flat_map(|n| {
                let elem = prop_oneof![
                    (0..n, 1..n, 0.0f64..=1.0).prop_map(move |(a, off, eta)| Element::Coupler {
                        modes: [a, (a + off) % n],
                        eta,
                    }),
                    (0..n, -10.0f64..10.0).prop_map(|(m, v)| Element::Phase {
                        mode: m,
                        value: PhaseValue::Literal(v)
                    }),
                    (0..n, prop::sample::select(vec!["phi", "theta", "x_1"])).prop_map(|(m, p)| {
                        Element::Phase {
                            mode: m,
                            value: PhaseValue::Param(p.to_string()),
                        }
                    }),
                ];
                (
                    Just(n),
                    prop::collection::vec(elem, 0..30),
                    prop::option::of("[a-z]{1,8}"),
                    any::<bool>(),
                )
                    .prop_map(|(n, elements, name, labelled)| {
                        let mut phase_params: Vec<String> = Vec::new();
                        for e in &elements {
                            if let Element::Phase {
                                value: PhaseValue::Param(p),
                                ..
                            } = e
                            {
                                if !phase_params.contains(p) {
                                    phase_params.push(p.clone());
                                }
                            }
                        }
                        let labels = labelled.then(|| (0..n).map(|i| format!("m{i}")).collect());
                        CircuitSpec {
                            name,
                            mode_count: n,
                            elements,
                            phase_params,
                            input_labels: labels.clone(),
                            output_labels: labels,
                        }
                    })
            })
        }

        proptest! {
            #[test]
            fn print_parse_round_trip(spec in arb_spec()) {
                let text = spec.to_string();
                prop_assert_eq!(parse_netlist(&text).unwrap(), spec);
            }

            #[test]
            fn elaborated_specs_are_unitary(spec in arb_spec(), phi in -7.0f64..7.0) {
                let mut b = ParamBinding::new();
                for p in &spec.phase_params {
                    b.set(p, phi);
                }
                let u = elaborate(&spec, &b).unwrap();
                prop_assert!(u.is_unitary(UNITARY_TOL));
            }

            #[test]
            fn parser_is_total(text in "\\PC{0,200}") {
                if let Err(NetlistError::Parse { line, .. }) = parse_netlist(&text) {
                    prop_assert!(line >= 1);
                }
            }

            #[test]
            fn parser_is_total_on_directive_soup(
                lines in prop::collection::vec(
                    prop::sample::select(vec![
                        "MODES 3", "MODES x", "DC 0 1 0.5", "DC 0 2 1/3", "DC 0 9 0.5",
                        "PS 1 $phi", "PS 1 0.2", "PS", "NAME c", "OUTPUTS a b c", "# c",
                        "", "DC 0 1 -1/2", "INPUTS p q", "XX",
                    ]),
                    0..12,
                )
            ) {
                let text = lines.join("\n");
                match parse_netlist(&text) {
                    Ok(spec) => prop_assert!(spec.elements.iter().all(|e| e.modes().iter().all(|&m| m < spec.mode_count))),
                    Err(NetlistError::Parse { line, .. }) => prop_assert!(line >= 1 && line <= lines.len().max(1)),
                    Err(other) => prop_assert!(false, "unexpected error {:?}", other),
                }
            }
        }
    }
}
