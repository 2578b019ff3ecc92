use std::fmt::Write as _;

use thiserror::Error;

use crate::plan::{Plan, PlanStep};

/// Renders `<start>: (<name>) [<duration>]` lines sorted by start time.
pub fn write_plan(plan: &Plan) -> String {
    let mut steps: Vec<&PlanStep> = plan.steps.iter().collect();
    steps.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut out = String::new();
    for s in steps {
        let _ = write!(out, "{:.6}: ({})", s.time, s.action);
        if let Some(d) = s.duration {
            let _ = write!(out, " [{:.6}]", d);
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Error, PartialEq)]
#[error("plan line {line}: {message}")]
pub struct PlanReadError {
    pub line: usize,
    pub message: String,
}

/// Reads the format produced by [`write_plan`]. Blank lines and `;` comments
/// are skipped; names are lower-cased and whitespace-normalised.
pub fn read_plan(text: &str) -> Result<Plan, PlanReadError> {
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let fail = |message: &str| PlanReadError {
            line,
            message: message.to_string(),
        };
        let content = raw.split(';').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (time, rest) = content
            .split_once(':')
            .ok_or_else(|| fail("expected `<time>: (<action>)`"))?;
        let time: f64 = time
            .trim()
            .parse()
            .map_err(|_| fail("start time is not a number"))?;
        if !time.is_finite() || time < 0.0 {
            return Err(fail("start time must be finite and nonnegative"));
        }
        let rest = rest.trim();
        let open = rest.strip_prefix('(').ok_or_else(|| fail("expected `(`"))?;
        let (name, tail) = open.split_once(')').ok_or_else(|| fail("expected `)`"))?;
        let action = name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        if action.is_empty() {
            return Err(fail("empty action name"));
        }
        let tail = tail.trim();
        let duration = if tail.is_empty() {
            None
        } else {
            let d = tail
                .strip_prefix('[')
                .and_then(|t| t.strip_suffix(']'))
                .ok_or_else(|| fail("expected `[<duration>]`"))?;
            let d: f64 = d.trim().parse().map_err(|_| fail("duration is not a number"))?;
            if !d.is_finite() || d < 0.0 {
                return Err(fail("duration must be finite and nonnegative"));
            }
            Some(d)
        };
        steps.push(PlanStep {
            time,
            action,
            duration,
        });
    }
    Ok(Plan::new(steps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_format_rendering() {
        let plan = Plan::new(vec![
            PlanStep {
                time: 5.001,
                action: "fly l0".into(),
                duration: Some(20.0),
            },
            PlanStep {
                time: 0.0,
                action: "take-off l0".into(),
                duration: Some(5.0),
            },
        ]);
        assert_eq!(
            write_plan(&plan),
            "0.000000: (take-off l0) [5.000000]\n5.001000: (fly l0) [20.000000]\n"
        );
        assert_eq!(write_plan(&Plan::default()), "");
    }

    #[test]
    fn instantaneous_lines_have_no_bracket() {
        let plan = Plan::new(vec![PlanStep {
            time: 1.5,
            action: "refuel t1".into(),
            duration: None,
        }]);
        let text = write_plan(&plan);
        assert_eq!(text, "1.500000: (refuel t1)\n");
        assert_eq!(read_plan(&text).unwrap(), plan);
    }

    #[test]
    fn reader_rejects_garbage_with_line_numbers() {
        let err = read_plan("; c\n0.0: (a) [1]\nnonsense\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(read_plan("0.0: (a) [x]").is_err());
        assert!(read_plan("-1: (a)").is_err());
    }
}
