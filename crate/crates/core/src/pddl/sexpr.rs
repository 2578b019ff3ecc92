//! S-expression reader with source positions.

use super::ParseDiagnostic;

#[derive(Clone, Debug, PartialEq)]
pub enum Sexpr {
    Atom(String, Pos),
    List(Vec<Sexpr>, Pos),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl Sexpr {
    pub fn pos(&self) -> Pos {
        match self {
            Sexpr::Atom(_, p) | Sexpr::List(_, p) => *p,
        }
    }

    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexpr::Atom(s, _) => Some(s),
            Sexpr::List(..) => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexpr]> {
        match self {
            Sexpr::List(items, _) => Some(items),
            Sexpr::Atom(..) => None,
        }
    }

    /// The leading atom of a list, e.g. `and` for `(and ...)`.
    pub fn head(&self) -> Option<&str> {
        self.list().and_then(|l| l.first()).and_then(Sexpr::atom)
    }

    pub fn is_atom(&self, s: &str) -> bool {
        self.atom() == Some(s)
    }
}

/// Reads exactly one top-level expression. Symbols are lower-cased.
pub fn read(text: &str) -> Result<Sexpr, ParseDiagnostic> {
    let mut stack: Vec<(Vec<Sexpr>, Pos)> = Vec::new();
    let mut done: Option<Sexpr> = None;
    let mut line = 1;
    let mut column = 0;
    let mut chars = text.chars().peekable();
    let mut token = String::new();
    let mut token_pos = Pos::default();

    fn flush(token: &mut String, pos: Pos, stack: &mut [(Vec<Sexpr>, Pos)]) -> Result<(), ParseDiagnostic> {
        if token.is_empty() {
            return Ok(());
        }
        let atom = Sexpr::Atom(std::mem::take(token).to_lowercase(), pos);
        match stack.last_mut() {
            Some((items, _)) => {
                items.push(atom);
                Ok(())
            }
            None => Err(ParseDiagnostic::error(pos, "symbol outside of any expression")),
        }
    }

    while let Some(c) = chars.next() {
        column += 1;
        let here = Pos { line, column };
        match c {
            ';' => {
                flush(&mut token, token_pos, &mut stack)?;
                for c in chars.by_ref() {
                    if c == '\n' {
                        line += 1;
                        column = 0;
                        break;
                    }
                }
            }
            '(' => {
                flush(&mut token, token_pos, &mut stack)?;
                if done.is_some() {
                    return Err(ParseDiagnostic::error(here, "text after the closing parenthesis"));
                }
                stack.push((Vec::new(), here));
            }
            ')' => {
                flush(&mut token, token_pos, &mut stack)?;
                let Some((items, pos)) = stack.pop() else {
                    return Err(ParseDiagnostic::error(here, "unbalanced `)`"));
                };
                let list = Sexpr::List(items, pos);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => done = Some(list),
                }
            }
            c if c.is_whitespace() => {
                flush(&mut token, token_pos, &mut stack)?;
                if c == '\n' {
                    line += 1;
                    column = 0;
                }
            }
            c => {
                if token.is_empty() {
                    token_pos = here;
                }
                token.push(c);
            }
        }
    }
    flush(&mut token, token_pos, &mut stack)?;
    if let Some((_, pos)) = stack.last() {
        return Err(ParseDiagnostic::error(*pos, "unclosed `(`"));
    }
    done.ok_or_else(|| ParseDiagnostic::error(Pos { line, column }, "empty input"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_lists_with_comments() {
        let e = read("; header\n(define (Domain x)\n  ; c\n  (:requirements :typing))").unwrap();
        let items = e.list().unwrap();
        assert!(items[0].is_atom("define"));
        assert_eq!(items[1].head(), Some("domain"));
        assert_eq!(items[2].pos(), Pos { line: 4, column: 3 });
    }

    #[test]
    fn unbalanced_reports_location() {
        let err = read("(a (b c)\n").unwrap_err();
        assert_eq!((err.line, err.column), (1, 1));
        let err = read("(a))").unwrap_err();
        assert_eq!((err.line, err.column), (1, 4));
    }
}
