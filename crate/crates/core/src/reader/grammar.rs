//! Keyword grammar covering the writer's templates, bare answers, and
//! light paraphrase through a synonym table. Sentences it cannot place are
//! skipped.

use crate::history::{last_confirmed, HistoryTurn};
use crate::meaning::{Arg, Constraint, MeaningProgram, Var};
use crate::perception::Predicate;
use crate::writer::CLARIFY_PREFIX;

use super::{compose, ConstraintSet, DialogueAct, ReadError, Reader};

const SYNONYMS: &[(&str, &str)] = &[
    ("tiny", "small"),
    ("smaller", "small"),
    ("smallest", "small"),
    ("smallish", "small"),
    ("little", "small"),
    ("big", "large"),
    ("bigger", "large"),
    ("biggest", "large"),
    ("larger", "large"),
    ("largest", "large"),
    ("huge", "large"),
    ("mid", "medium"),
    ("midsize", "medium"),
    ("middle", "medium"),
    ("black", "dark"),
    ("darker", "dark"),
    ("darkest", "dark"),
    ("gray", "grey"),
    ("greyish", "grey"),
    ("grayish", "grey"),
    ("lighter", "light"),
    ("lightest", "light"),
    ("white", "light"),
    ("pale", "light"),
];

const YES: &[&str] = &["yes", "yeah", "yep", "yup", "yea", "correct"];
const NO: &[&str] = &["no", "nope", "nah", "negative"];

fn attr(tok: &str) -> Option<Predicate> {
    Some(match tok {
        "small" => Predicate::IsSmall,
        "medium" => Predicate::IsMedium,
        "large" => Predicate::IsLarge,
        "dark" => Predicate::IsDark,
        "grey" => Predicate::IsGrey,
        "light" => Predicate::IsLight,
        _ => return None,
    })
}

/// Position words labelling one dot of a pair.
fn pair_position(tok: &str) -> Option<Predicate> {
    Some(match tok {
        "left" => Predicate::IsLeftOf,
        "right" => Predicate::IsRightOf,
        "top" | "upper" | "higher" => Predicate::IsAbove,
        "bottom" | "lower" => Predicate::IsBelow,
        _ => return None,
    })
}

/// Relation words between a dot and something else.
fn relation(tok: &str) -> Option<Predicate> {
    Some(match tok {
        "left" => Predicate::IsLeftOf,
        "right" => Predicate::IsRightOf,
        "above" | "over" | "higher" => Predicate::IsAbove,
        "below" | "under" | "beneath" | "lower" => Predicate::IsBelow,
        "near" | "close" | "next" => Predicate::IsNear,
        _ => return None,
    })
}

/// Lowercases, strips the clarification prefix, splits into sentences and
/// tokens, and maps synonyms. "dark grey" and "light grey" collapse to
/// "dark" and "light".
pub fn normalize(text: &str) -> Vec<Vec<String>> {
    let mut s = text.trim().to_lowercase().replace('\u{2019}', "'").replace('-', " ");
    let prefix = CLARIFY_PREFIX.trim().to_lowercase();
    if let Some(rest) = s.strip_prefix(&prefix) {
        s = rest.to_string();
    }
    let mut sentences = Vec::new();
    for raw in s.split(['.', '?', '!', ';', '\n']) {
        let mut toks: Vec<String> = Vec::new();
        for w in raw.replace(',', " , ").split_whitespace() {
            let w = w.trim_matches(|c: char| !(c.is_alphanumeric() || c == '\'' || c == ','));
            if w.is_empty() {
                continue;
            }
            let w = SYNONYMS.iter().find(|(k, _)| *k == w).map_or(w, |(_, v)| v);
            if w == "grey" && toks.last().is_some_and(|p| p == "dark" || p == "light") {
                continue;
            }
            toks.push(w.to_string());
        }
        if !toks.is_empty() {
            sentences.push(toks);
        }
    }
    sentences
}

/// Leading yes/no answer, if any, and the remaining content sentences.
fn split_answer(mut sentences: Vec<Vec<String>>) -> (Option<bool>, Vec<Vec<String>>) {
    let Some(first) = sentences.first_mut() else {
        return (None, sentences);
    };
    let pol = if YES.contains(&first[0].as_str()) {
        Some(true)
    } else if NO.contains(&first[0].as_str()) {
        Some(false)
    } else {
        None
    };
    if pol.is_some() {
        let rest: Vec<String> = first.drain(..).skip(1).skip_while(|t| t == ",").collect();
        *first = rest;
        if sentences[0].is_empty() {
            sentences.remove(0);
        }
    }
    (pol, sentences)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Select,
    Pair,
    FollowUp,
    Single,
    Relation,
    Other,
}

fn has(t: &[String], w: &str) -> bool {
    t.iter().any(|x| x == w)
}

fn has_any(t: &[String], ws: &[&str]) -> bool {
    t.iter().any(|x| ws.contains(&x.as_str()))
}

fn attrs_of(t: &[String]) -> Vec<Predicate> {
    t.iter().filter_map(|w| attr(w)).collect()
}

fn kind(t: &[String]) -> Kind {
    let mentions_dot = has_any(t, &["dot", "dots", "one", "ones"]);
    let asks = has_any(t, &["see", "there", "have"]);
    if has_any(t, &["select", "choose", "pick", "click"]) {
        Kind::Select
    } else if has(t, "pair") || (has(t, "two") && has_any(t, &["dots", "ones"])) {
        Kind::Pair
    } else if asks && mentions_dot && !attrs_of(t).is_empty() {
        if has_any(t, &["those", "them", "these", "both"]) {
            Kind::FollowUp
        } else {
            Kind::Single
        }
    } else if mentions_dot && has_any(t, &["is", "are"]) && t.iter().any(|w| relation(w).is_some()) {
        Kind::Relation
    } else {
        Kind::Other
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Parsed {
    polarity: Option<bool>,
    act: DialogueAct,
    cs: ConstraintSet,
}

fn unary(attrs: &[Predicate], v: Var) -> impl Iterator<Item = Constraint> + '_ {
    attrs.iter().map(move |p| Constraint::unary(*p, v))
}

fn var(i: usize) -> Var {
    Var(i as u8)
}

fn parse_pair(t: &[String]) -> ([Vec<Predicate>; 2], Vec<Constraint>) {
    let mut attrs: [Vec<Predicate>; 2] = [Vec::new(), Vec::new()];
    let mut pos: [Vec<Predicate>; 2] = [Vec::new(), Vec::new()];
    let mut rels = Vec::new();
    let stop = ["dots", "ones", "where", ",", "that", "which"];
    if let Some(i) = t.iter().position(|w| w == "pair" || w == "two") {
        let end = t[i + 1..].iter().position(|w| stop.contains(&w.as_str())).map_or(t.len(), |e| i + 1 + e);
        let shared = attrs_of(&t[i + 1..end]);
        attrs.iter_mut().for_each(|a| a.extend(&shared));
    }
    // "the <position> dot is <attrs>" clauses, in order of mention.
    let mut next = 0;
    let mut i = 0;
    while i < t.len() && next < 2 {
        if t[i] != "the" {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        let mut words = Vec::new();
        while let Some(p) = t.get(j).and_then(|w| pair_position(w)) {
            words.push(p);
            j += 1;
        }
        let is_clause = !words.is_empty()
            && t.get(j).is_some_and(|w| w == "dot" || w == "one")
            && t.get(j + 1).is_some_and(|w| w == "is");
        if !is_clause {
            i += 1;
            continue;
        }
        let mut k = j + 2;
        while k < t.len() && t[k] != "," && !(t[k] == "and" && t.get(k + 1).is_some_and(|w| w == "the")) {
            if let Some(a) = attr(&t[k]) {
                attrs[next].push(a);
            }
            k += 1;
        }
        pos[next] = words;
        next += 1;
        i = k;
    }
    // "one is <attrs> the other <attrs>"
    if next == 0 {
        if let Some(o) = t.iter().position(|w| w == "other") {
            let one = (0..o.saturating_sub(1)).find(|&i| {
                t[i] == "one"
                    && t[i + 1] == "is"
                    && (i == 0 || (attr(&t[i - 1]).is_none() && pair_position(&t[i - 1]).is_none()))
            });
            if let Some(i) = one {
                attrs[0].extend(attrs_of(&t[i + 2..o]));
                let end = t[o + 1..].iter().position(|w| w == ",").map_or(t.len(), |e| o + 1 + e);
                attrs[1].extend(attrs_of(&t[o + 1..end]));
            }
        }
    }
    if let Some(v) = (0..2).find(|v| !pos[*v].is_empty()) {
        rels.extend(pos[v].iter().map(|p| Constraint::spatial(*p, var(v), Arg::Var(var(1 - v)))));
    }
    let together = has(t, "together") || t.windows(2).any(|w| w[0] == "each" && w[1] == "other");
    if together {
        rels.push(Constraint::spatial(Predicate::IsNear, Var::A, Arg::Var(Var::B)));
    }
    (attrs, rels)
}

/// "the <attrs> one is <relations> the <attrs> one", matched to the pair's
/// dots by their attributes.
fn parse_relation(t: &[String], attrs: &[Vec<Predicate>; 2]) -> Vec<Constraint> {
    let Some(is) = t.iter().position(|w| w == "is" || w == "are") else {
        return Vec::new();
    };
    let subj = attrs_of(&t[..is]);
    let obj_at = t.iter().rposition(|w| w == "the").filter(|k| *k > is).unwrap_or(t.len());
    let obj = attrs_of(&t[obj_at..]);
    let mut rels: Vec<Predicate> = t[is + 1..obj_at].iter().filter_map(|w| relation(w)).collect();
    rels.dedup();
    let covers = |have: &Vec<Predicate>, want: &Vec<Predicate>| want.iter().all(|p| have.contains(p));
    let fits: Vec<usize> = (0..2)
        .filter(|s| {
            let (sv, ov) = (&attrs[*s], &attrs[1 - s]);
            (!subj.is_empty() || !obj.is_empty()) && covers(sv, &subj) && covers(ov, &obj)
        })
        .collect();
    match fits.as_slice() {
        [s] => rels.into_iter().map(|p| Constraint::spatial(p, var(*s), Arg::Var(var(1 - s)))).collect(),
        _ => Vec::new(),
    }
}

/// Attributes of the first mentioned dot and the relation words after it.
fn parse_single(t: &[String]) -> (Vec<Predicate>, Vec<Predicate>) {
    let dot = t.iter().position(|w| w == "dot" || w == "one").unwrap_or(t.len());
    let mut rels: Vec<Predicate> = t.get(dot + 1..).unwrap_or(&[]).iter().filter_map(|w| relation(w)).collect();
    rels.dedup();
    (attrs_of(&t[..dot]), rels)
}

fn parse(utterance: &str) -> Result<Parsed, ReadError> {
    let (polarity, sentences) = split_answer(normalize(utterance));
    let kinds: Vec<Kind> = sentences.iter().map(|s| kind(s)).collect();
    let lead = kinds.iter().position(|k| matches!(k, Kind::Select | Kind::Pair | Kind::FollowUp | Kind::Single));
    let Some(lead) = lead else {
        return match polarity {
            Some(_) => Ok(Parsed { polarity, act: DialogueAct::Answer, cs: ConstraintSet::default() }),
            None => Err(ReadError::Unparseable(format!("no recognizable request in {utterance:?}"))),
        };
    };
    let t = &sentences[lead];
    let (act, cs) = match kinds[lead] {
        Kind::Select => {
            let a = attrs_of(t);
            if a.is_empty() {
                (DialogueAct::End, ConstraintSet::default())
            } else {
                (DialogueAct::End, ConstraintSet { new_dots: 1, constraints: unary(&a, Var::A).collect() })
            }
        }
        Kind::Pair => {
            let (attrs, mut rels) = parse_pair(t);
            for (s, k) in sentences.iter().zip(&kinds).skip(lead + 1) {
                if *k == Kind::Relation {
                    rels.extend(parse_relation(s, &attrs));
                }
            }
            let mut cs: Vec<Constraint> = unary(&attrs[0], Var::A).chain(unary(&attrs[1], Var::B)).collect();
            cs.extend(rels);
            (DialogueAct::New, ConstraintSet { new_dots: 2, constraints: cs })
        }
        Kind::FollowUp => {
            let (a, rels) = parse_single(t);
            let mut cs: Vec<Constraint> = unary(&a, Var::A).collect();
            cs.extend(rels.into_iter().map(|p| Constraint::spatial(p, Var::A, Arg::Ref)));
            (DialogueAct::FollowUp, ConstraintSet { new_dots: 1, constraints: cs })
        }
        Kind::Single => {
            let (a, _) = parse_single(t);
            (DialogueAct::New, ConstraintSet { new_dots: 1, constraints: unary(&a, Var::A).collect() })
        }
        Kind::Relation | Kind::Other => unreachable!("lead sentence is a request"),
    };
    Ok(Parsed { polarity, act, cs })
}

/// The yes/no answer an utterance opens with.
pub fn polarity(utterance: &str) -> Option<bool> {
    split_answer(normalize(utterance)).0
}

pub fn classify_act(utterance: &str, _history: &[HistoryTurn]) -> Result<DialogueAct, ReadError> {
    Ok(parse(utterance)?.act)
}

fn reference_for(act: DialogueAct, polarity: Option<bool>, history: &[HistoryTurn]) -> Option<usize> {
    match act {
        DialogueAct::New => None,
        DialogueAct::Answer => history.len().checked_sub(1),
        DialogueAct::End => last_confirmed(history, polarity),
        DialogueAct::FollowUp => last_confirmed(history, polarity)
            .or_else(|| history.iter().rposition(|t| t.program.as_ref().is_some_and(|p| p.act().is_question()))),
    }
}

/// Index of the earlier turn the utterance builds on: the previous turn for
/// answers, the latest confirmed question for follow-ups and selections.
pub fn resolve_reference(utterance: &str, history: &[HistoryTurn]) -> Result<Option<usize>, ReadError> {
    let p = parse(utterance)?;
    Ok(reference_for(p.act, p.polarity, history))
}

pub fn generate_constraints(utterance: &str, _history: &[HistoryTurn]) -> Result<ConstraintSet, ReadError> {
    Ok(parse(utterance)?.cs)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GrammarReader;

impl Reader for GrammarReader {
    fn read(&self, utterance: &str, history: &[HistoryTurn]) -> Result<MeaningProgram, ReadError> {
        let p = parse(utterance)?;
        let r = reference_for(p.act, p.polarity, history);
        compose(p.act, r, p.polarity, &p.cs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::Speaker;
    use crate::meaning::{parse_program, Act};

    fn turn(speaker: Speaker, dsl: &str) -> HistoryTurn {
        HistoryTurn { speaker, text: String::new(), program: Some(parse_program(dsl).unwrap()) }
    }

    fn read(text: &str, h: &[HistoryTurn]) -> String {
        GrammarReader.read(text, h).unwrap().to_string()
    }

    fn asked() -> Vec<HistoryTurn> {
        vec![turn(Speaker::Partner, "new new=2 { is_dark(a); is_small(b) }")]
    }

    #[test]
    fn followup_with_yes_refers_to_previous_turn() {
        let h = asked();
        assert_eq!(
            read("Yes. Is there a medium size and light color dot to the right and below those?", &h),
            "followup ref=0 new=1 confirm=yes { is_medium(a); is_light(a); is_right_of(a, ref); is_below(a, ref) }"
        );
    }

    #[test]
    fn followup_with_no_refers_to_last_confirmed_turn() {
        let mut h = asked();
        h.push(turn(Speaker::Agent, "new new=2 confirm=yes { is_large(a); is_grey(b) }"));
        assert_eq!(
            read("No. Is there a small size and dark color dot near those?", &h),
            "followup ref=0 new=1 confirm=no { is_small(a); is_dark(a); is_near(a, ref) }"
        );
    }

    #[test]
    fn select_is_an_end_act_with_payload() {
        let h = asked();
        assert_eq!(classify_act("Let's select the medium size and grey color one.", &h).unwrap(), DialogueAct::End);
        let p = GrammarReader.read("Yes. Let's select the medium size and grey color one.", &h).unwrap();
        assert_eq!(p.to_string(), "select ref=0 new=1 confirm=yes { is_medium(a); is_grey(a) }");
        assert_eq!(GrammarReader.read("I will pick now.", &h).unwrap().act(), Act::End);
    }

    #[test]
    fn bare_answers() {
        let h = asked();
        assert_eq!(read("Yes", &h), "confirm_yes ref=0 {}");
        assert_eq!(read("nope.", &h), "confirm_no ref=0 {}");
        assert_eq!(read("Yes I see them.", &h), "confirm_yes ref=0 {}");
        assert!(GrammarReader.read("Yes", &[]).is_err());
    }

    #[test]
    fn lone_dot_question_opens_new_line() {
        assert_eq!(
            read("No, do you see a lone medium sized grey dot?", &asked()),
            "new new=1 confirm=no { is_medium(a); is_grey(a) }"
        );
    }

    #[test]
    fn free_form_pair_with_relations() {
        let text =
            "No. Do you see a pair of medium sized dots, close together, one is dark grey the other light grey. \
                    The light grey one is slightly above and the left of the dark one.";
        assert_eq!(
            read(text, &asked()),
            "new new=2 confirm=no { is_medium(a); is_medium(b); is_dark(a); is_light(b); is_left_of(b, a); is_above(b, a); is_near(a, b) }"
        );
    }

    #[test]
    fn free_form_pair_with_synonyms() {
        let text =
            "No. do you see a pair where the right one is medium and grey and the left one is smaller and lighter. \
                    The smaller one is slightly below the medium sized one.";
        assert_eq!(
            read(text, &asked()),
            "new new=2 confirm=no { is_small(b); is_medium(a); is_grey(a); is_light(b); is_right_of(a, b); is_below(b, a) }"
        );
    }

    #[test]
    fn writer_pair_template() {
        let text = "Do you see a pair of dots, where the top dot is small-sized and light and the bottom dot is medium-sized and dark?";
        assert_eq!(read(text, &[]), "new new=2 { is_small(a); is_medium(b); is_dark(b); is_light(a); is_above(a, b) }");
    }

    #[test]
    fn clarification_prefix_is_ignored() {
        let text = "Sorry, I did not understand. Is there a large size and dark color dot above those?";
        let h = vec![
            turn(Speaker::Agent, "new new=2 { is_dark(a); is_small(b) }"),
            turn(Speaker::Partner, "confirm_yes ref=0 {}"),
        ];
        assert_eq!(read(text, &h), "followup ref=0 new=1 { is_large(a); is_dark(a); is_above(a, ref) }");
    }

    #[test]
    fn normalization() {
        assert_eq!(
            normalize("A tiny BLACK-ish dot, dark gray!"),
            vec![vec!["a", "small", "dark", "ish", "dot", ",", "dark"]]
        );
    }

    #[test]
    fn gibberish_is_unparseable() {
        assert!(matches!(GrammarReader.read("asdf qwerty", &[]), Err(ReadError::Unparseable(_))));
        assert!(matches!(GrammarReader.read("", &[]), Err(ReadError::Unparseable(_))));
        // A follow-up with nothing to refer back to.
        assert!(GrammarReader.read("Is there a small size and dark color dot near those?", &[]).is_err());
    }

    #[test]
    fn steps_are_callable_alone() {
        let h = asked();
        let u = "Yes. Is there a small size and grey color dot below those?";
        assert_eq!(classify_act(u, &h).unwrap(), DialogueAct::FollowUp);
        assert_eq!(polarity(u), Some(true));
        assert_eq!(resolve_reference(u, &h).unwrap(), Some(0));
        let cs = generate_constraints(u, &h).unwrap();
        assert_eq!(cs.new_dots, 1);
        assert_eq!(cs.constraints.len(), 3);
    }
}
