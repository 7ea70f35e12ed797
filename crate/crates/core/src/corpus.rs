//! Sentence-pair datasets: tokens with optional POS/role annotations,
//! raw-text tokenization, the inline `surface|POS|ROLE` format and the
//! four-column TSV pair file.

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Grammatical role of a token inside its sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Subj,
    Pred,
    Obj,
    Attr,
    Adv,
    Comp,
    None,
}

impl Role {
    pub const ALL: [Role; 7] = [
        Role::Subj,
        Role::Pred,
        Role::Obj,
        Role::Attr,
        Role::Adv,
        Role::Comp,
        Role::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Subj => "SUBJ",
            Role::Pred => "PRED",
            Role::Obj => "OBJ",
            Role::Attr => "ATTR",
            Role::Adv => "ADV",
            Role::Comp => "COMP",
            Role::None => "NONE",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::format(format!("unknown role `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    surface: String,
    pub pos: Option<String>,
    pub role: Option<Role>,
}

impl Token {
    /// Surfaces must be non-empty and free of whitespace and `|`, the
    /// annotation separator.
    pub fn new(surface: impl Into<String>) -> Result<Self> {
        let surface = surface.into();
        if surface.is_empty() {
            return Err(Error::format("empty token surface"));
        }
        if surface.chars().any(|c| c.is_whitespace() || c == '|') {
            return Err(Error::format(format!(
                "token surface `{surface}` contains whitespace or `|`"
            )));
        }
        Ok(Token {
            surface,
            pos: None,
            role: None,
        })
    }

    pub fn annotated(
        surface: impl Into<String>,
        pos: Option<&str>,
        role: Option<Role>,
    ) -> Result<Self> {
        let mut token = Token::new(surface)?;
        token.pos = pos.map(str::to_owned);
        token.role = role;
        Ok(token)
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    fn is_annotated(&self) -> bool {
        self.pos.is_some() || self.role.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> + '_ {
        self.tokens.iter().map(Token::surface)
    }

    /// First `n` tokens.
    pub fn truncated(&self, n: usize) -> Sentence {
        Sentence {
            tokens: self.tokens.iter().take(n).cloned().collect(),
        }
    }

    pub fn is_annotated(&self) -> bool {
        self.tokens.iter().any(Token::is_annotated)
    }

    /// Render in the inline annotated format, `_` for absent fields.
    pub fn to_annotated(&self) -> String {
        let parts: Vec<String> = self
            .tokens
            .iter()
            .map(|t| {
                format!(
                    "{}|{}|{}",
                    t.surface,
                    t.pos.as_deref().unwrap_or("_"),
                    t.role.map_or("_", Role::as_str)
                )
            })
            .collect();
        parts.join(" ")
    }

    /// Surfaces joined by single spaces.
    pub fn to_plain(&self) -> String {
        self.surfaces().collect::<Vec<_>>().join(" ")
    }

    /// Pair-file form: plain text when it tokenizes back to this sentence,
    /// the annotated format otherwise.
    pub fn to_field(&self) -> String {
        let plain = self.to_plain();
        if !self.is_annotated() && tokenize(&plain).is_ok_and(|s| s == *self) {
            plain
        } else {
            self.to_annotated()
        }
    }
}

const PUNCTUATION: &[char] = &['.', ',', '!', '?', ';', ':', '\'', '"', '(', ')'];

fn is_punct(c: char) -> bool {
    PUNCTUATION.contains(&c)
}

/// Whitespace tokenizer that lowercases and splits leading/trailing
/// punctuation runs into their own tokens. `|` is treated as whitespace
/// since it is reserved for annotations.
pub fn tokenize(raw: &str) -> Result<Sentence> {
    let mut tokens = Vec::new();
    for chunk in raw.split(|c: char| c.is_whitespace() || c == '|') {
        if chunk.is_empty() {
            continue;
        }
        let lower = chunk.to_lowercase();
        let core = lower.trim_matches(is_punct);
        if core.is_empty() {
            tokens.push(Token::new(lower)?);
            continue;
        }
        let start = lower.len() - lower.trim_start_matches(is_punct).len();
        let end = lower.trim_end_matches(is_punct).len();
        if start > 0 {
            tokens.push(Token::new(&lower[..start])?);
        }
        tokens.push(Token::new(core)?);
        if end < lower.len() {
            tokens.push(Token::new(&lower[end..])?);
        }
    }
    if tokens.is_empty() {
        return Err(Error::EmptySentence);
    }
    Ok(Sentence::new(tokens))
}

/// Parse whitespace-separated `surface|POS|ROLE` tokens.
pub fn parse_annotated(raw: &str) -> Result<Sentence> {
    let mut tokens = Vec::new();
    for item in raw.split_whitespace() {
        let fields: Vec<&str> = item.split('|').collect();
        if fields.len() != 3 {
            return Err(Error::format(format!(
                "annotated token `{item}` needs 3 `|`-separated fields, found {}",
                fields.len()
            )));
        }
        let pos = match fields[1] {
            "_" | "" => None,
            p => Some(p),
        };
        let role = match fields[2] {
            "_" | "" => None,
            r => Some(r.parse::<Role>()?),
        };
        tokens.push(Token::annotated(fields[0], pos, role)?);
    }
    if tokens.is_empty() {
        return Err(Error::EmptySentence);
    }
    Ok(Sentence::new(tokens))
}

/// Annotated format when the text contains `|`, raw tokenization otherwise.
pub fn parse_sentence(raw: &str) -> Result<Sentence> {
    if raw.contains('|') {
        parse_annotated(raw)
    } else {
        tokenize(raw)
    }
}

/// Fallback role assignment when no parser output is available.
///
/// First NOUN becomes SUBJ (first token when the sentence carries no POS
/// tags at all, or has no NOUN), first VERB becomes PRED, first NOUN after
/// the PRED becomes OBJ; every other unroled token becomes NONE. Existing
/// roles are kept, and a role already present in the sentence is not
/// handed out a second time.
pub fn assign_roles_heuristic(s: &Sentence) -> Sentence {
    let mut out = s.clone();
    let is_pos = |t: &Token, tag: &str| t.pos.as_deref() == Some(tag);

    let taken = |out: &Sentence, role: Role| out.tokens.iter().any(|t| t.role == Some(role));

    let subj_idx = out
        .tokens
        .iter()
        .position(|t| is_pos(t, "NOUN"))
        .or(if out.is_empty() { None } else { Some(0) });
    let pred_idx = out.tokens.iter().position(|t| is_pos(t, "VERB"));
    let obj_idx = pred_idx.and_then(|p| {
        out.tokens
            .iter()
            .enumerate()
            .skip(p + 1)
            .find(|(i, t)| is_pos(t, "NOUN") && Some(*i) != subj_idx)
            .map(|(i, _)| i)
    });

    for (idx, role) in [
        (subj_idx, Role::Subj),
        (pred_idx, Role::Pred),
        (obj_idx, Role::Obj),
    ] {
        if let Some(i) = idx {
            if out.tokens[i].role.is_none() && !taken(&out, role) {
                out.tokens[i].role = Some(role);
            }
        }
    }
    for t in &mut out.tokens {
        if t.role.is_none() {
            t.role = Some(Role::None);
        }
    }
    out
}

/// Gold label of a sentence pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label {
    Binary(bool),
    Graded(f64),
}

impl Label {
    /// `Some(true)` for similar binary labels; graded labels return `None`.
    pub fn as_binary(self) -> Option<bool> {
        match self {
            Label::Binary(b) => Some(b),
            Label::Graded(_) => None,
        }
    }

    pub fn kind(self) -> LabelKind {
        match self {
            Label::Binary(_) => LabelKind::Binary,
            Label::Graded(_) => LabelKind::Graded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    Binary,
    Graded,
}

/// Which binary label value means "similar".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelConvention {
    #[default]
    OneIsSimilar,
    ZeroIsSimilar,
}

impl LabelConvention {
    fn decode(self, value: u8) -> bool {
        match self {
            LabelConvention::OneIsSimilar => value == 1,
            LabelConvention::ZeroIsSimilar => value == 0,
        }
    }

    fn encode(self, similar: bool) -> u8 {
        match (self, similar) {
            (LabelConvention::OneIsSimilar, s) => s as u8,
            (LabelConvention::ZeroIsSimilar, s) => (!s) as u8,
        }
    }
}

impl FromStr for LabelConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_is_similar" => Ok(LabelConvention::OneIsSimilar),
            "zero_is_similar" => Ok(LabelConvention::ZeroIsSimilar),
            other => Err(Error::Config(format!("unknown label convention `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub id: String,
    pub a: Sentence,
    pub b: Sentence,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pairs: Vec<LabeledPair>,
    label_kind: LabelKind,
}

impl Dataset {
    /// Fails when a pair's label kind disagrees with `label_kind`, a
    /// graded label lies outside `[0, 5]`, or an id could not be written
    /// back to a pair file (tabs, line breaks, leading `#`).
    pub fn new(pairs: Vec<LabeledPair>, label_kind: LabelKind) -> Result<Self> {
        for p in &pairs {
            if p.id.starts_with('#') || p.id.contains(['\t', '\n', '\r']) {
                return Err(Error::format(format!(
                    "pair id {:?} cannot be stored in a pair file",
                    p.id
                )));
            }
            if p.label.kind() != label_kind {
                return Err(Error::LabelKind);
            }
            if let Label::Graded(g) = p.label {
                if !(0.0..=5.0).contains(&g) {
                    return Err(Error::format(format!("graded label {g} outside [0,5]")));
                }
            }
        }
        Ok(Dataset { pairs, label_kind })
    }

    pub fn pairs(&self) -> &[LabeledPair] {
        &self.pairs
    }

    pub fn label_kind(&self) -> LabelKind {
        self.label_kind
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Write the four-column TSV form read by [`parse_pair_file`].
    pub fn to_tsv(&self, convention: LabelConvention) -> String {
        let mut out = String::new();
        for p in &self.pairs {
            let label = match p.label {
                Label::Binary(b) => convention.encode(b).to_string(),
                Label::Graded(g) => g.to_string(),
            };
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                p.id,
                p.a.to_field(),
                p.b.to_field(),
                label
            ));
        }
        out
    }
}

/// Read `id<TAB>sentence1<TAB>sentence2<TAB>label` lines. Blank lines and
/// lines starting with `#` are skipped; errors carry 1-based line numbers.
pub fn parse_pair_file<R: BufRead>(
    reader: R,
    label_kind: LabelKind,
    convention: LabelConvention,
) -> Result<Dataset> {
    let mut pairs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::format_at(lineno, e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::format_at(
                lineno,
                format!("expected 4 tab-separated columns, found {}", cols.len()),
            ));
        }
        let a = parse_sentence(cols[1]).map_err(|e| sentence_error(e, lineno))?;
        let b = parse_sentence(cols[2]).map_err(|e| sentence_error(e, lineno))?;
        let label =
            parse_label(cols[3].trim(), label_kind, convention).map_err(|e| e.at_line(lineno))?;
        pairs.push(LabeledPair {
            id: cols[0].to_owned(),
            a,
            b,
            label,
        });
    }
    Dataset::new(pairs, label_kind)
}

fn sentence_error(e: Error, line: usize) -> Error {
    match e {
        Error::EmptySentence => Error::format_at(line, "empty sentence"),
        other => other.at_line(line),
    }
}

fn parse_label(raw: &str, kind: LabelKind, convention: LabelConvention) -> Result<Label> {
    match kind {
        LabelKind::Binary => match raw {
            "0" => Ok(Label::Binary(convention.decode(0))),
            "1" => Ok(Label::Binary(convention.decode(1))),
            other => Err(Error::format(format!(
                "binary label must be 0 or 1, got `{other}`"
            ))),
        },
        LabelKind::Graded => {
            let g: f64 = raw
                .parse()
                .map_err(|_| Error::format(format!("unparseable label `{raw}`")))?;
            if !(0.0..=5.0).contains(&g) {
                return Err(Error::format(format!("graded label {g} outside [0,5]")));
            }
            Ok(Label::Graded(g))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(s: &Sentence) -> Vec<&str> {
        s.surfaces().collect()
    }

    fn roles(s: &Sentence) -> Vec<Option<Role>> {
        s.tokens.iter().map(|t| t.role).collect()
    }

    #[test]
    fn tokenize_whitespace() {
        let s = tokenize("Can I use it").unwrap();
        assert_eq!(surfaces(&s), ["can", "i", "use", "it"]);
        assert!(s.tokens.iter().all(|t| t.pos.is_none() && t.role.is_none()));
    }

    #[test]
    fn tokenize_splits_punctuation_runs() {
        assert_eq!(surfaces(&tokenize("locked.").unwrap()), ["locked", "."]);
        assert_eq!(
            surfaces(&tokenize("(\"Hello\")...").unwrap()),
            ["(\"", "hello", "\")..."]
        );
        assert_eq!(surfaces(&tokenize("can't").unwrap()), ["can't"]);
        assert_eq!(surfaces(&tokenize("?!").unwrap()), ["?!"]);
    }

    #[test]
    fn tokenize_empty() {
        assert!(matches!(tokenize(""), Err(Error::EmptySentence)));
        assert!(matches!(tokenize("  \t "), Err(Error::EmptySentence)));
    }

    #[test]
    fn annotated_parse() {
        let s = parse_annotated("cat|NOUN|SUBJ runs|VERB|PRED").unwrap();
        assert_eq!(roles(&s), [Some(Role::Subj), Some(Role::Pred)]);
        assert_eq!(s.tokens[0].pos.as_deref(), Some("NOUN"));

        let s = parse_annotated("cat|NOUN|_").unwrap();
        assert_eq!(s.tokens[0].role, None);
        let s = parse_annotated("cat|_|OBJ").unwrap();
        assert_eq!(s.tokens[0].pos, None);
    }

    #[test]
    fn annotated_errors() {
        assert!(matches!(
            parse_annotated("cat|NOUN"),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            parse_annotated("cat|NOUN|SUBJ|x"),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            parse_annotated("cat|NOUN|AGENT"),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn heuristic_roles_basic() {
        let s = parse_annotated("cat|NOUN|_ chases|VERB|_ mice|NOUN|_").unwrap();
        let r = assign_roles_heuristic(&s);
        assert_eq!(
            roles(&r),
            [Some(Role::Subj), Some(Role::Pred), Some(Role::Obj)]
        );
    }

    #[test]
    fn heuristic_roles_keep_existing() {
        let s = parse_annotated("cat|NOUN|OBJ chases|VERB|ADV mice|NOUN|ATTR").unwrap();
        assert_eq!(assign_roles_heuristic(&s), s);
    }

    #[test]
    fn heuristic_single_token_fallback() {
        let s = parse_annotated("quickly|ADV|_").unwrap();
        assert_eq!(roles(&assign_roles_heuristic(&s)), [Some(Role::Subj)]);

        let s = parse_annotated("quickly|ADV|_ now|ADV|_").unwrap();
        assert_eq!(
            roles(&assign_roles_heuristic(&s)),
            [Some(Role::Subj), Some(Role::None)]
        );

        // A lone VERB is both the first token and the first VERB; SUBJ wins.
        let s = parse_annotated("run|VERB|_").unwrap();
        assert_eq!(roles(&assign_roles_heuristic(&s)), [Some(Role::Subj)]);

        let s = tokenize("hello world").unwrap();
        assert_eq!(
            roles(&assign_roles_heuristic(&s)),
            [Some(Role::Subj), Some(Role::None)]
        );
    }

    #[test]
    fn heuristic_is_idempotent() {
        let s = parse_annotated("the|DET|_ cat|NOUN|_ saw|VERB|_ a|DET|_ dog|NOUN|_").unwrap();
        let once = assign_roles_heuristic(&s);
        assert_eq!(assign_roles_heuristic(&once), once);
    }

    #[test]
    fn pair_file_basic() {
        let ds = parse_pair_file(
            "1\tcan i use it\tcan't i use it\t1\n".as_bytes(),
            LabelKind::Binary,
            LabelConvention::OneIsSimilar,
        )
        .unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.pairs()[0].label, Label::Binary(true));
        assert_eq!(ds.pairs()[0].b.tokens[0].surface(), "can't");

        let inverted = parse_pair_file(
            "1\ta\tb\t1\n".as_bytes(),
            LabelKind::Binary,
            LabelConvention::ZeroIsSimilar,
        )
        .unwrap();
        assert_eq!(inverted.pairs()[0].label, Label::Binary(false));
    }

    #[test]
    fn pair_file_empty_and_comments() {
        let ds = parse_pair_file(
            "".as_bytes(),
            LabelKind::Binary,
            LabelConvention::OneIsSimilar,
        )
        .unwrap();
        assert!(ds.is_empty());
        let ds = parse_pair_file(
            "# header\n\n7\tx|N|SUBJ\ty\t0\n".as_bytes(),
            LabelKind::Binary,
            LabelConvention::OneIsSimilar,
        )
        .unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.pairs()[0].a.tokens[0].role, Some(Role::Subj));
    }

    #[test]
    fn pair_file_errors_carry_line() {
        let err = parse_pair_file(
            "1\ta\tb\t7.0\n".as_bytes(),
            LabelKind::Graded,
            LabelConvention::OneIsSimilar,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Format { line: Some(1), .. }), "{err}");

        let err = parse_pair_file(
            "1\ta\tb\t1\n2\ta\tb\n".as_bytes(),
            LabelKind::Binary,
            LabelConvention::OneIsSimilar,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Format { line: Some(2), .. }));

        let err = parse_pair_file(
            "1\ta\tb\tyes\n".as_bytes(),
            LabelKind::Binary,
            LabelConvention::OneIsSimilar,
        )
        .unwrap_err();
        assert!(err.to_string().contains("line 1"));

        let err = parse_pair_file(
            "1\t \tb\t1\n".as_bytes(),
            LabelKind::Binary,
            LabelConvention::OneIsSimilar,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Format { line: Some(1), .. }));
    }

    #[test]
    fn graded_labels() {
        let ds = parse_pair_file(
            "a\tx y\tx z\t3.8\n".as_bytes(),
            LabelKind::Graded,
            LabelConvention::OneIsSimilar,
        )
        .unwrap();
        assert_eq!(ds.pairs()[0].label, Label::Graded(3.8));
    }
}
