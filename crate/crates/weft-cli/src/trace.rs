//! Trace programs: small integer-update task programs with a line-oriented
//! text form, a deterministic generator, and the serial oracle that defines
//! their ground-truth result.
//!
//! Line format, one step per line:
//! `<definition_kind> <mode:datum|param:value>...`, e.g.
//! `set out:0 param:5` or `add inout:2 in:0`.

use std::fmt;

use weft::AccessMode;

use crate::rng::SplitMix64;

/// One step of a trace program. Declared modes exactly match the body's
/// reads and writes; all arithmetic wraps so results are deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceStep {
    /// `data[dst] = value` — out:dst param:value
    Set { dst: usize, value: i64 },
    /// `data[dst] += 1` — inout:dst
    Inc { dst: usize },
    /// `data[dst] += data[src]` — inout:dst in:src
    Add { dst: usize, src: usize },
    /// `data[dst] *= data[src]` — inout:dst in:src
    Mul { dst: usize, src: usize },
    /// `data[acc] += data[src]` — reduction:acc in:src
    ReduceSum { acc: usize, src: usize },
    /// reads `data[src]` — in:src
    Read { src: usize },
}

/// A bound argument of one step, mirroring the runtime's access targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepTarget {
    Datum(usize),
    Param(i64),
}

impl TraceStep {
    pub fn kind_name(self) -> &'static str {
        match self {
            TraceStep::Set { .. } => "set",
            TraceStep::Inc { .. } => "inc",
            TraceStep::Add { .. } => "add",
            TraceStep::Mul { .. } => "mul",
            TraceStep::ReduceSum { .. } => "reduce_sum",
            TraceStep::Read { .. } => "read",
        }
    }

    /// The step's accesses in argument order.
    pub fn accesses(self) -> Vec<(AccessMode, StepTarget)> {
        match self {
            TraceStep::Set { dst, value } => vec![
                (AccessMode::Out, StepTarget::Datum(dst)),
                (AccessMode::Parameter, StepTarget::Param(value)),
            ],
            TraceStep::Inc { dst } => vec![(AccessMode::InOut, StepTarget::Datum(dst))],
            TraceStep::Add { dst, src } => vec![
                (AccessMode::InOut, StepTarget::Datum(dst)),
                (AccessMode::In, StepTarget::Datum(src)),
            ],
            TraceStep::Mul { dst, src } => vec![
                (AccessMode::InOut, StepTarget::Datum(dst)),
                (AccessMode::In, StepTarget::Datum(src)),
            ],
            TraceStep::ReduceSum { acc, src } => vec![
                (AccessMode::Reduction, StepTarget::Datum(acc)),
                (AccessMode::In, StepTarget::Datum(src)),
            ],
            TraceStep::Read { src } => vec![(AccessMode::In, StepTarget::Datum(src))],
        }
    }

    /// Oracle semantics: applies the step to a plain data vector.
    pub fn apply(self, data: &mut [i64]) {
        match self {
            TraceStep::Set { dst, value } => data[dst] = value,
            TraceStep::Inc { dst } => data[dst] = data[dst].wrapping_add(1),
            TraceStep::Add { dst, src } => data[dst] = data[dst].wrapping_add(data[src]),
            TraceStep::Mul { dst, src } => data[dst] = data[dst].wrapping_mul(data[src]),
            TraceStep::ReduceSum { acc, src } => data[acc] = data[acc].wrapping_add(data[src]),
            TraceStep::Read { src } => {
                let _ = data[src];
            }
        }
    }

    fn max_datum(self) -> usize {
        self.accesses()
            .iter()
            .filter_map(|(_, t)| match t {
                StepTarget::Datum(d) => Some(*d),
                StepTarget::Param(_) => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn to_line(self) -> String {
        let mut line = self.kind_name().to_string();
        for (mode, target) in self.accesses() {
            match target {
                StepTarget::Datum(d) => line.push_str(&format!(" {mode}:{d}")),
                StepTarget::Param(v) => line.push_str(&format!(" {mode}:{v}")),
            }
        }
        line
    }

    pub fn parse_line(line: &str) -> Result<TraceStep, TraceParseError> {
        let mut tokens = line.split_whitespace();
        let kind = tokens.next().ok_or_else(|| TraceParseError {
            line: line.to_string(),
            reason: "empty step".into(),
        })?;
        let err = |reason: &str| TraceParseError {
            line: line.to_string(),
            reason: reason.into(),
        };
        let mut fields = Vec::new();
        for token in tokens {
            let (mode, value) = token
                .split_once(':')
                .ok_or_else(|| err("expected mode:value tokens"))?;
            fields.push((mode.to_string(), value.to_string()));
        }
        let datum = |field: &(String, String), mode: &str| -> Result<usize, TraceParseError> {
            if field.0 != mode {
                return Err(err(&format!("expected `{mode}:` argument")));
            }
            field.1.parse().map_err(|_| err("bad datum index"))
        };
        let step = match (kind, fields.as_slice()) {
            ("set", [d, p]) => {
                if p.0 != "param" {
                    return Err(err("expected `param:` argument"));
                }
                TraceStep::Set {
                    dst: datum(d, "out")?,
                    value: p.1.parse().map_err(|_| err("bad param value"))?,
                }
            }
            ("inc", [d]) => TraceStep::Inc {
                dst: datum(d, "inout")?,
            },
            ("add", [d, s]) => TraceStep::Add {
                dst: datum(d, "inout")?,
                src: datum(s, "in")?,
            },
            ("mul", [d, s]) => TraceStep::Mul {
                dst: datum(d, "inout")?,
                src: datum(s, "in")?,
            },
            ("reduce_sum", [a, s]) => TraceStep::ReduceSum {
                acc: datum(a, "reduction")?,
                src: datum(s, "in")?,
            },
            ("read", [s]) => TraceStep::Read {
                src: datum(s, "in")?,
            },
            (other, _) => {
                return Err(err(&format!(
                    "unknown step kind `{other}` or wrong argument count"
                )))
            }
        };
        Ok(step)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bad trace line `{line}`: {reason}")]
pub struct TraceParseError {
    pub line: String,
    pub reason: String,
}

/// A generated (or parsed) program over `n_data` integer data regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceProgram {
    pub seed: u64,
    pub n_data: usize,
    pub steps: Vec<TraceStep>,
}

impl TraceProgram {
    /// Executes every step in submission order on a plain vector; no runtime
    /// involved. This is the ground truth parallel runs are compared to.
    pub fn serial_oracle(&self) -> Vec<i64> {
        let mut data = vec![0i64; self.n_data];
        for step in &self.steps {
            step.apply(&mut data);
        }
        data
    }

    pub fn parse(text: &str) -> Result<TraceProgram, TraceParseError> {
        let mut steps = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            steps.push(TraceStep::parse_line(line)?);
        }
        let n_data = steps
            .iter()
            .map(|s| s.max_datum() + 1)
            .max()
            .unwrap_or(1);
        Ok(TraceProgram {
            seed: 0,
            n_data,
            steps,
        })
    }
}

impl fmt::Display for TraceProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            writeln!(f, "{}", step.to_line())?;
        }
        Ok(())
    }
}

/// Deterministically generates a program: `n_tasks` integer-update steps
/// over `n_data` regions. Reductions come in short runs so reduction epochs
/// actually occur. A step never names the same datum twice.
pub fn generate_program(seed: u64, n_tasks: usize, n_data: usize) -> TraceProgram {
    assert!(n_data >= 1, "need at least one data region");
    let mut rng = SplitMix64::new(seed);
    let mut steps = Vec::with_capacity(n_tasks);
    while steps.len() < n_tasks {
        let pick = |rng: &mut SplitMix64| rng.below(n_data as u64) as usize;
        let other = |rng: &mut SplitMix64, dst: usize| {
            (dst + 1 + rng.below(n_data as u64 - 1) as usize) % n_data
        };
        let kind = rng.below(6);
        let two_datums_possible = n_data >= 2;
        let step = match kind {
            0 => TraceStep::Set {
                dst: pick(&mut rng),
                value: rng.below(17) as i64 - 8,
            },
            1 => TraceStep::Inc {
                dst: pick(&mut rng),
            },
            2 if two_datums_possible => {
                let dst = pick(&mut rng);
                TraceStep::Add {
                    dst,
                    src: other(&mut rng, dst),
                }
            }
            3 if two_datums_possible => {
                let dst = pick(&mut rng);
                TraceStep::Mul {
                    dst,
                    src: other(&mut rng, dst),
                }
            }
            4 if two_datums_possible => {
                // A short run of reductions on one accumulator opens a
                // reduction epoch.
                let acc = pick(&mut rng);
                let burst = 1 + rng.below(3) as usize;
                for _ in 0..burst {
                    if steps.len() == n_tasks {
                        break;
                    }
                    steps.push(TraceStep::ReduceSum {
                        acc,
                        src: other(&mut rng, acc),
                    });
                }
                continue;
            }
            _ => TraceStep::Read {
                src: pick(&mut rng),
            },
        };
        steps.push(step);
    }
    TraceProgram {
        seed,
        n_data,
        steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_program_yields_untouched_zeros() {
        let program = TraceProgram {
            seed: 0,
            n_data: 3,
            steps: vec![],
        };
        assert_eq!(program.serial_oracle(), vec![0, 0, 0]);
    }

    #[test]
    fn single_set_lands() {
        let program = TraceProgram {
            seed: 0,
            n_data: 1,
            steps: vec![TraceStep::Set { dst: 0, value: 7 }],
        };
        assert_eq!(program.serial_oracle(), vec![7]);
    }

    #[test]
    fn pipelined_example_oracle() {
        // set a0=0; inc a0; read a0; set a1=1; inc a0; read a0.
        let program = TraceProgram {
            seed: 0,
            n_data: 2,
            steps: vec![
                TraceStep::Set { dst: 0, value: 0 },
                TraceStep::Inc { dst: 0 },
                TraceStep::Read { src: 0 },
                TraceStep::Set { dst: 1, value: 1 },
                TraceStep::Inc { dst: 0 },
                TraceStep::Read { src: 0 },
            ],
        };
        assert_eq!(program.serial_oracle(), vec![2, 1]);
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(generate_program(9, 50, 8), generate_program(9, 50, 8));
        assert_ne!(
            generate_program(9, 50, 8).steps,
            generate_program(10, 50, 8).steps
        );
    }

    #[test]
    fn generator_respects_bounds() {
        let program = generate_program(123, 50, 8);
        assert_eq!(program.steps.len(), 50);
        for step in &program.steps {
            assert!(step.max_datum() < 8);
            // No step names the same datum twice.
            let datums: Vec<usize> = step
                .accesses()
                .iter()
                .filter_map(|(_, t)| match t {
                    StepTarget::Datum(d) => Some(*d),
                    StepTarget::Param(_) => None,
                })
                .collect();
            let mut unique = datums.clone();
            unique.dedup();
            assert_eq!(datums, unique);
        }
    }

    #[test]
    fn zero_tasks_is_an_empty_program() {
        let program = generate_program(5, 0, 4);
        assert!(program.steps.is_empty());
    }

    #[test]
    fn single_datum_programs_avoid_two_datum_steps() {
        let program = generate_program(77, 40, 1);
        for step in &program.steps {
            assert!(matches!(
                step,
                TraceStep::Set { .. } | TraceStep::Inc { .. } | TraceStep::Read { .. }
            ));
        }
    }

    #[test]
    fn trace_text_round_trips() {
        let program = generate_program(42, 30, 5);
        let text = program.to_string();
        let parsed = TraceProgram::parse(&text).unwrap();
        assert_eq!(parsed.steps, program.steps);
        assert!(parsed.n_data <= program.n_data);
    }

    #[test]
    fn parse_rejects_malformed_lines() {
        assert!(TraceProgram::parse("set out:0").is_err());
        assert!(TraceProgram::parse("warp inout:0").is_err());
        assert!(TraceProgram::parse("add inout:0 out:1").is_err());
        assert!(TraceProgram::parse("inc inout:x").is_err());
    }

    #[test]
    fn parse_line_shapes() {
        assert_eq!(
            TraceStep::parse_line("set out:3 param:-5").unwrap(),
            TraceStep::Set { dst: 3, value: -5 }
        );
        assert_eq!(
            TraceStep::parse_line("reduce_sum reduction:1 in:0").unwrap(),
            TraceStep::ReduceSum { acc: 1, src: 0 }
        );
    }
}
