//! A very small expression evaluator standing in for the page's JS engine
//! when the fake server receives a script it does not recognize.
//!
//! Supported: number and string literals, `true`/`false`/`null`, `+ - * /`,
//! parentheses, a few read-only globals (`document.title`, `location.href`,
//! `window.scrollY`, `window.innerWidth`, `window.innerHeight`), and
//! `throw <expr>` with `new Error(msg)`.

use serde_json::Value;

pub(crate) struct Globals<'a> {
    pub title: &'a str,
    pub url: &'a str,
    pub scroll_y: f64,
    pub inner_width: f64,
    pub inner_height: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Str(String),
    Ident(String),
    Punct(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() || c == ';' {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Tok::Num(text.parse().map_err(|_| format!("bad number {text}"))?));
        } else if c == '"' || c == '\'' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err("unterminated string".into()),
                    Some(&q) if q == c => break,
                    Some('\\') => {
                        i += 1;
                        let e = *chars.get(i).ok_or("unterminated string")?;
                        s.push(match e {
                            'n' => '\n',
                            't' => '\t',
                            other => other,
                        });
                    }
                    Some(&ch) => s.push(ch),
                }
                i += 1;
            }
            i += 1;
            out.push(Tok::Str(s));
        } else if c.is_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || matches!(chars[i], '_' | '$' | '.')) {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/(),".contains(c) {
            out.push(Tok::Punct(c));
            i += 1;
        } else {
            return Err(format!("unexpected character {c:?}"));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    globals: &'a Globals<'a>,
}

/// An evaluated value, or a thrown one.
enum Flow {
    Thrown(String),
    Syntax(String),
}

fn js_string(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "null".into(),
        Value::Number(n) => n.to_string(),
        other => other.to_string(),
    }
}

fn number(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::from(v as i64)
    } else {
        serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
    }
}

fn as_f64(v: &Value) -> Result<f64, Flow> {
    match v {
        Value::Number(n) => Ok(n.as_f64().unwrap_or(f64::NAN)),
        Value::Bool(b) => Ok(f64::from(u8::from(*b))),
        Value::Null => Ok(0.0),
        _ => Err(Flow::Thrown("TypeError: operand is not a number".into())),
    }
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn program(&mut self) -> Result<Value, Flow> {
        if self.peek() == Some(&Tok::Ident("throw".into())) {
            self.pos += 1;
            let v = self.expr()?;
            return Err(Flow::Thrown(match v {
                Value::Object(o) if o.contains_key("__error") => {
                    format!("Error: {}", js_string(&o["__error"]))
                }
                other => js_string(&other),
            }));
        }
        let v = self.expr()?;
        if self.pos < self.toks.len() {
            return Err(Flow::Syntax("unexpected trailing tokens".into()));
        }
        Ok(v)
    }

    fn expr(&mut self) -> Result<Value, Flow> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                let rhs = self.term()?;
                acc = if acc.is_string() || rhs.is_string() {
                    Value::String(js_string(&acc) + &js_string(&rhs))
                } else {
                    number(as_f64(&acc)? + as_f64(&rhs)?)
                };
            } else if self.eat('-') {
                let rhs = self.term()?;
                acc = number(as_f64(&acc)? - as_f64(&rhs)?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Value, Flow> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                let rhs = self.unary()?;
                acc = number(as_f64(&acc)? * as_f64(&rhs)?);
            } else if self.eat('/') {
                let rhs = self.unary()?;
                acc = number(as_f64(&acc)? / as_f64(&rhs)?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Value, Flow> {
        if self.eat('-') {
            let v = self.unary()?;
            return Ok(number(-as_f64(&v)?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Value, Flow> {
        match self.next() {
            Some(Tok::Num(n)) => Ok(number(n)),
            Some(Tok::Str(s)) => Ok(Value::String(s)),
            Some(Tok::Punct('(')) => {
                let v = self.expr()?;
                if !self.eat(')') {
                    return Err(Flow::Syntax("missing )".into()));
                }
                Ok(v)
            }
            Some(Tok::Ident(id)) => self.ident(&id),
            other => Err(Flow::Syntax(format!("unexpected token {other:?}"))),
        }
    }

    fn ident(&mut self, id: &str) -> Result<Value, Flow> {
        let g = self.globals;
        Ok(match id {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            "null" => Value::Null,
            "document.title" => Value::String(g.title.to_string()),
            "location.href" => Value::String(g.url.to_string()),
            "window.scrollY" => number(g.scroll_y),
            "window.innerWidth" => number(g.inner_width),
            "window.innerHeight" => number(g.inner_height),
            "new" => {
                let ctor = match self.next() {
                    Some(Tok::Ident(c)) => c,
                    _ => return Err(Flow::Syntax("expected constructor".into())),
                };
                if !self.eat('(') {
                    return Err(Flow::Syntax("expected (".into()));
                }
                let msg = if self.eat(')') {
                    Value::String(String::new())
                } else {
                    let m = self.expr()?;
                    if !self.eat(')') {
                        return Err(Flow::Syntax("missing )".into()));
                    }
                    m
                };
                if !ctor.ends_with("Error") {
                    return Err(Flow::Thrown(format!("ReferenceError: {ctor} is not defined")));
                }
                serde_json::json!({ "__error": msg })
            }
            other => return Err(Flow::Thrown(format!("ReferenceError: {other} is not defined"))),
        })
    }
}

/// Evaluates `src`; `Err` carries the thrown exception's description.
pub(crate) fn evaluate(src: &str, globals: &Globals<'_>) -> Result<Value, String> {
    let toks = tokenize(src).map_err(|e| format!("SyntaxError: {e}"))?;
    let mut p = Parser {
        toks,
        pos: 0,
        globals,
    };
    p.program().map_err(|f| match f {
        Flow::Thrown(msg) => msg,
        Flow::Syntax(msg) => format!("SyntaxError: {msg}"),
    })
}
