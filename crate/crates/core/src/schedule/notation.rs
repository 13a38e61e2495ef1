//! Text notation for [`DualRateConfig`].
//!
//! ```text
//! spec   := "etaS=" number
//!         | rate "," rate                       (etaC first, then etaI)
//! rate   := ("etaC" | "etaI") "=" number [ vt ]
//! vt     := "VT" int "-" int [","] number "%" ("inc" | "dec")
//! ```
//!
//! Whitespace is free between tokens. `etaS=x` is shorthand for two static
//! rates both equal to `x`, and the formatter writes single-rate configs that
//! way.
//!
//! ```
//! use dvlr::schedule::{parse_schedule_spec, Direction, RateMode};
//!
//! let cfg = parse_schedule_spec("etaC=0.05, etaI=0.01 VT175-225 0.01% inc").unwrap();
//! assert!(cfg.correct.is_static());
//! let RateMode::Variable(vt) = cfg.incorrect.mode else { panic!() };
//! assert_eq!((vt.lo, vt.hi, vt.direction), (175, 225, Direction::Increase));
//! ```

use super::{DualRateConfig, Direction, RateMode, RateSchedule, VariableThreshold};
use crate::error::{Error, Result};

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            position: self.pos,
            message: message.into(),
        })
    }

    fn eat(&mut self, literal: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(literal) {
            self.pos += literal.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, literal: &str) -> Result<()> {
        if self.eat(literal) {
            Ok(())
        } else {
            self.error(format!("expected `{literal}`"))
        }
    }

    fn span(&mut self, accept: impl Fn(char) -> bool) -> &'a str {
        self.skip_ws();
        let rest = self.rest();
        let len = rest.find(|c: char| !accept(c)).unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let token = self.span(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+'));
        match token.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => {
                self.pos = start;
                self.error(format!("expected a number, found `{}`", preview(self.rest())))
            }
        }
    }

    fn integer(&mut self) -> Result<u64> {
        self.skip_ws();
        let start = self.pos;
        let token = self.span(|c| c.is_ascii_digit());
        token.parse::<u64>().or_else(|_| {
            self.pos = start;
            self.error(format!("expected an integer, found `{}`", preview(self.rest())))
        })
    }

    fn peek_digit(&self) -> bool {
        self.rest()
            .trim_start()
            .starts_with(|c: char| c.is_ascii_digit() || c == '.')
    }
}

fn preview(s: &str) -> &str {
    let end = s.char_indices().nth(12).map_or(s.len(), |(i, _)| i);
    &s[..end]
}

fn parse_rate(cur: &mut Cursor<'_>, name: &str) -> Result<RateSchedule> {
    cur.expect(name)?;
    cur.expect("=")?;
    let initial = cur.number()?;
    if !cur.eat("VT") {
        return Ok(RateSchedule::fixed(initial));
    }
    let lo = cur.integer()?;
    cur.expect("-")?;
    let hi = cur.integer()?;
    // "VT175-225, 0.01% inc" also appears with a comma before the percentage
    let save = cur.pos;
    if cur.eat(",") && !cur.peek_digit() {
        cur.pos = save;
    }
    let delta_percent = cur.number()?;
    cur.expect("%")?;
    let direction = if cur.eat("inc") {
        cur.eat("rease");
        Direction::Increase
    } else if cur.eat("dec") {
        cur.eat("rease");
        Direction::Decrease
    } else {
        return cur.error("expected `inc` or `dec`");
    };
    Ok(RateSchedule {
        initial,
        mode: RateMode::Variable(VariableThreshold {
            lo,
            hi,
            direction,
            delta_percent,
        }),
    })
}

/// Parses the schedule notation into a validated config.
pub fn parse_schedule_spec(text: &str) -> Result<DualRateConfig> {
    let mut cur = Cursor { text, pos: 0 };
    let config = if cur.eat("etaS") {
        cur.expect("=")?;
        DualRateConfig::single(cur.number()?)
    } else {
        let correct = parse_rate(&mut cur, "etaC")?;
        cur.expect(",")?;
        let incorrect = parse_rate(&mut cur, "etaI")?;
        DualRateConfig::new(correct, incorrect)
    };
    cur.skip_ws();
    if !cur.rest().is_empty() {
        return cur.error(format!("unexpected trailing text `{}`", preview(cur.rest())));
    }
    config.validate().map_err(|e| Error::Parse {
        position: 0,
        message: e.to_string(),
    })?;
    Ok(config)
}

fn format_rate(name: &str, schedule: &RateSchedule) -> String {
    match schedule.mode {
        RateMode::Static => format!("{name}={}", schedule.initial),
        RateMode::Variable(vt) => format!(
            "{name}={} VT{}-{} {}% {}",
            schedule.initial,
            vt.lo,
            vt.hi,
            vt.delta_percent,
            match vt.direction {
                Direction::Increase => "inc",
                Direction::Decrease => "dec",
            }
        ),
    }
}

/// Renders a config in the notation accepted by [`parse_schedule_spec`].
/// The tie rule is not part of the notation.
pub fn format_schedule_spec(config: &DualRateConfig) -> String {
    if config.is_single_rate() {
        return format!("etaS={}", config.correct.initial);
    }
    format!(
        "{}, {}",
        format_rate("etaC", &config.correct),
        format_rate("etaI", &config.incorrect)
    )
}
