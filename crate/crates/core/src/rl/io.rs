//! CSV persistence of Q-tables over gridworld states.

use std::hash::Hash;

use smallvec::SmallVec;
use thiserror::Error;

use super::{ActionValues, ExtendedState, QTable, TauKey, NUM_ACTIONS};
use crate::env::{EnvState, Heading};

#[derive(Debug, Error)]
pub enum QTableIoError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("key schema `{found}` does not match `{expected}`")]
    Schema { expected: String, found: String },
}

/// Text form of a Q-table key.
pub trait KeyText: Sized {
    /// Descriptor written in the file header.
    fn schema() -> &'static str;
    fn to_text(&self) -> String;
    fn from_text(s: &str) -> Option<Self>;
}

fn state_text(s: &EnvState) -> String {
    format!("{}:{}:{}", s.x, s.y, s.heading.index())
}

fn parse_state(s: &str) -> Option<EnvState> {
    let mut it = s.split(':');
    let x = it.next()?.parse().ok()?;
    let y = it.next()?.parse().ok()?;
    let h = Heading::from_index(it.next()?.parse().ok()?)?;
    it.next().is_none().then_some(EnvState::new(x, y, h))
}

impl KeyText for TauKey<EnvState> {
    fn schema() -> &'static str {
        "tau-history x:y:heading|... oldest first"
    }

    fn to_text(&self) -> String {
        self.iter().map(state_text).collect::<Vec<_>>().join("|")
    }

    fn from_text(s: &str) -> Option<Self> {
        s.split('|').map(parse_state).collect::<Option<SmallVec<_>>>()
    }
}

impl KeyText for ExtendedState<EnvState> {
    fn schema() -> &'static str {
        "extended x:y:heading;disjunct;location;clock1/clock2/..."
    }

    fn to_text(&self) -> String {
        let clocks: Vec<String> = self.valuation.iter().map(|v| v.to_string()).collect();
        format!("{};{};{};{}", state_text(&self.env), self.disjunct, self.location, clocks.join("/"))
    }

    fn from_text(s: &str) -> Option<Self> {
        let mut it = s.split(';');
        let env = parse_state(it.next()?)?;
        let disjunct = it.next()?.parse().ok()?;
        let location = it.next()?.parse().ok()?;
        let clocks = it.next()?;
        let valuation = if clocks.is_empty() {
            SmallVec::new()
        } else {
            clocks.split('/').map(|v| v.parse().ok()).collect::<Option<_>>()?
        };
        it.next().is_none().then_some(ExtendedState { env, disjunct, location, valuation })
    }
}

/// Serializes a table with one `key,action,value` row per stored entry,
/// sorted by key text and action.
pub fn write_qtable<K: KeyText + Eq + Hash + Clone>(q: &QTable<K>) -> String {
    let mut rows: Vec<(String, ActionValues)> = q.iter().map(|(k, v)| (k.to_text(), *v)).collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = format!("# key-schema: {}\nkey,action,value\n", K::schema());
    for (k, v) in rows {
        for (a, x) in v.iter().enumerate() {
            out.push_str(&format!("{k},{a},{x:?}\n"));
        }
    }
    out
}

pub fn read_qtable<K: KeyText + Eq + Hash + Clone>(text: &str) -> Result<QTable<K>, QTableIoError> {
    let mut lines = text.lines().enumerate();
    let schema = lines.next().map(|(_, l)| l.trim_start_matches("# key-schema:").trim()).unwrap_or("");
    if schema != K::schema() {
        return Err(QTableIoError::Schema { expected: K::schema().into(), found: schema.into() });
    }
    let mut q = QTable::new();
    for (i, line) in lines {
        let err = |msg: &str| QTableIoError::Parse { line: i + 1, msg: msg.into() };
        if line == "key,action,value" || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.rsplitn(3, ',');
        let value: f64 = parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| err("bad value"))?;
        let action: usize = parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| err("bad action"))?;
        let key = parts.next().and_then(K::from_text).ok_or_else(|| err("bad key"))?;
        if action >= NUM_ACTIONS {
            return Err(err("action out of range"));
        }
        let mut v = q.get(&key);
        v[action] = value;
        q.set(key, v);
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extended_table_round_trip() {
        let mut q: QTable<ExtendedState<EnvState>> = QTable::new();
        let k = ExtendedState {
            env: EnvState::new(3, 4, Heading::W),
            disjunct: 1,
            location: 2,
            valuation: SmallVec::from_slice(&[17, 0]),
        };
        q.set(k.clone(), [0.1 + 0.2, -10.0, 1e-300]);
        let text = write_qtable(&q);
        assert!(text.contains("3:4:3;1;2;17/0,0,0.30000000000000004\n"));
        let back: QTable<ExtendedState<EnvState>> = read_qtable(&text).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn tau_table_round_trip_and_schema_check() {
        let mut q: QTable<TauKey<EnvState>> = QTable::new();
        let k: TauKey<EnvState> =
            SmallVec::from_slice(&[EnvState::new(0, 0, Heading::N), EnvState::new(1, 0, Heading::E)]);
        q.set(k, [1.5, 2.5, -3.5]);
        let text = write_qtable(&q);
        assert_eq!(read_qtable::<TauKey<EnvState>>(&text).unwrap(), q);
        assert!(matches!(
            read_qtable::<ExtendedState<EnvState>>(&text),
            Err(QTableIoError::Schema { .. })
        ));
    }
}
