//! Places, transitions, local incidence triples, nets and systems.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::bag::Bag;

macro_rules! node_id {
    ($name:ident, $prefix:literal, $what:literal) => {
        #[doc = concat!("Index of a ", $what, ", rendered as `", $prefix, "N`.")]
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }

        impl FromStr for $name {
            type Err = IdParseError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let s = s.trim();
                let digits = s
                    .strip_prefix($prefix)
                    .map(|d| d.strip_prefix('(').and_then(|d| d.strip_suffix(')')).unwrap_or(d))
                    .ok_or_else(|| IdParseError(s.to_string()))?;
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(IdParseError(s.to_string()));
                }
                digits
                    .parse()
                    .map($name)
                    .map_err(|_| IdParseError(s.to_string()))
            }
        }
    };
}

node_id!(PlaceId, "p", "place");
node_id!(TranId, "t", "transition");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed node identifier {0:?}")]
pub struct IdParseError(pub String);

/// Shorthand constructors used heavily by models and tests.
pub fn p(i: u32) -> PlaceId {
    PlaceId(i)
}

pub fn t(i: u32) -> TranId {
    TranId(i)
}

pub type PlaceBag = Bag<PlaceId>;

/// Local incidence record of one transition: input, output and inhibitor
/// weights over places.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ArcTriple {
    pub input: PlaceBag,
    pub output: PlaceBag,
    pub inhibitor: PlaceBag,
}

impl ArcTriple {
    pub fn new(input: PlaceBag, output: PlaceBag, inhibitor: PlaceBag) -> Self {
        ArcTriple {
            input,
            output,
            inhibitor,
        }
    }

    /// Zeroes `place` in all three bags.
    pub fn remove_place(&self, place: PlaceId) -> ArcTriple {
        ArcTriple {
            input: self.input.set_mult(place, 0),
            output: self.output.set_mult(place, 0),
            inhibitor: self.inhibitor.set_mult(place, 0),
        }
    }

    pub fn mentions(&self, place: PlaceId) -> bool {
        self.input.contains(place) || self.output.contains(place) || self.inhibitor.contains(place)
    }

    /// Input equals output: firing would not change the marking.
    pub fn is_null(&self) -> bool {
        self.input == self.output
    }

    /// Some place carries an input arc at least as heavy as its inhibitor
    /// arc, so the transition can never be enabled.
    pub fn is_structurally_dead(&self) -> bool {
        self.inhibitor
            .iter()
            .any(|(place, h)| self.input.lookup(place) >= h)
    }

    pub fn places(&self) -> impl Iterator<Item = PlaceId> + '_ {
        self.input
            .support()
            .chain(self.output.support())
            .chain(self.inhibitor.support())
    }
}

impl fmt::Display for ArcTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}]", self.input, self.output, self.inhibitor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("duplicate entry for transition {0}")]
    DuplicateTransition(TranId),
}

/// A net: finite map from transitions to their incidence triples, iterated
/// in transition order. May contain null or dead transitions until
/// [`Net::normalize`] is applied.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Net {
    entries: BTreeMap<TranId, ArcTriple>,
}

impl Net {
    pub fn empty() -> Self {
        Net::default()
    }

    /// Builds a net, rejecting repeated transition keys.
    pub fn from_entries<I>(entries: I) -> Result<Self, NetError>
    where
        I: IntoIterator<Item = (TranId, ArcTriple)>,
    {
        let mut map = BTreeMap::new();
        for (tr, triple) in entries {
            if map.insert(tr, triple).is_some() {
                return Err(NetError::DuplicateTransition(tr));
            }
        }
        Ok(Net { entries: map })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TranId, &ArcTriple)> + '_ {
        self.entries.iter().map(|(&k, v)| (k, v))
    }

    pub fn transitions(&self) -> impl Iterator<Item = TranId> + '_ {
        self.entries.keys().copied()
    }

    pub fn get(&self, tr: TranId) -> Option<&ArcTriple> {
        self.entries.get(&tr)
    }

    pub fn input_of(&self, tr: TranId) -> Option<&PlaceBag> {
        self.get(tr).map(|q| &q.input)
    }

    pub fn output_of(&self, tr: TranId) -> Option<&PlaceBag> {
        self.get(tr).map(|q| &q.output)
    }

    pub fn inhibitor_of(&self, tr: TranId) -> Option<&PlaceBag> {
        self.get(tr).map(|q| &q.inhibitor)
    }

    /// Whether `place` occurs on any arc.
    pub fn contains_place(&self, place: PlaceId) -> bool {
        self.entries.values().any(|q| q.mentions(place))
    }

    /// Places mentioned by some arc, in index order.
    pub fn places(&self) -> Vec<PlaceId> {
        let mut out: Vec<PlaceId> = self.entries.values().flat_map(|q| q.places()).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Inserts or replaces the entry for `tr`.
    pub fn with_entry(&self, tr: TranId, triple: ArcTriple) -> Net {
        let mut entries = self.entries.clone();
        entries.insert(tr, triple);
        Net { entries }
    }

    pub fn without(&self, tr: TranId) -> Net {
        let mut entries = self.entries.clone();
        entries.remove(&tr);
        Net { entries }
    }

    /// Drops null transitions (input = output) and structurally dead ones
    /// (input weight >= inhibitor weight on a common place). Surviving
    /// triples are untouched; the isolated-place reduction is not applied.
    pub fn normalize(&self) -> Net {
        Net {
            entries: self
                .entries
                .iter()
                .filter(|(_, q)| !q.is_null() && !q.is_structurally_dead())
                .map(|(&k, q)| (k, q.clone()))
                .collect(),
        }
    }

    pub fn is_normalized(&self) -> bool {
        self.entries
            .values()
            .all(|q| !q.is_null() && !q.is_structurally_dead())
    }
}

impl fmt::Display for Net {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return f.write_str("emptyN");
        }
        f.write_str("(")?;
        for (i, (tr, q)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{} |-> {}", tr, q)?;
        }
        f.write_str(")")
    }
}

/// A net paired with a marking. The net is kept normalized; it is shared
/// behind an `Arc` because reachable states reuse a handful of net shapes.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SystemState {
    net: Arc<Net>,
    marking: PlaceBag,
}

impl SystemState {
    pub fn new(net: Net, marking: PlaceBag) -> Self {
        SystemState {
            net: Arc::new(net.normalize()),
            marking,
        }
    }

    /// Reuses an already normalized shared net.
    pub fn with_shared_net(net: Arc<Net>, marking: PlaceBag) -> Self {
        if net.is_normalized() {
            SystemState { net, marking }
        } else {
            Self::new((*net).clone(), marking)
        }
    }

    pub fn net(&self) -> &Net {
        &self.net
    }

    pub fn shared_net(&self) -> &Arc<Net> {
        &self.net
    }

    pub fn marking(&self) -> &PlaceBag {
        &self.marking
    }

    pub fn with_marking(&self, marking: PlaceBag) -> Self {
        SystemState {
            net: Arc::clone(&self.net),
            marking,
        }
    }

    /// Place occurs in the net or carries tokens.
    pub fn contains_place(&self, place: PlaceId) -> bool {
        self.net.contains_place(place) || self.marking.contains(place)
    }

    /// `I(t) <= m` and `H(t) >' m`; `None` when `t` is not in the net.
    pub fn enabled(&self, tr: TranId) -> Option<bool> {
        self.net.get(tr).map(|q| enabled_in(q, &self.marking))
    }

    pub fn enabled_transitions(&self) -> impl Iterator<Item = TranId> + '_ {
        self.net
            .iter()
            .filter(|(_, q)| enabled_in(q, &self.marking))
            .map(|(tr, _)| tr)
    }

    /// No transition is enabled. Rewrite rules may still apply.
    pub fn is_dead(&self) -> bool {
        self.enabled_transitions().next().is_none()
    }

    /// The net is non-empty after normalization.
    pub fn is_well_defined(&self) -> bool {
        !self.net.is_empty()
    }

    /// Canonical byte encoding; equal keys iff equal states.
    pub fn key(&self) -> StateKey {
        let mut buf = Vec::with_capacity(16 + self.net.len() * 48 + self.marking.support_len() * 12);
        encode_u32(&mut buf, self.net.len() as u32);
        for (tr, q) in self.net.iter() {
            encode_u32(&mut buf, tr.0);
            encode_bag(&mut buf, &q.input);
            encode_bag(&mut buf, &q.output);
            encode_bag(&mut buf, &q.inhibitor);
        }
        encode_bag(&mut buf, &self.marking);
        StateKey(buf)
    }
}

fn enabled_in(q: &ArcTriple, marking: &PlaceBag) -> bool {
    q.input.leq(marking) && q.inhibitor.gt_restricted(marking)
}

fn encode_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn encode_bag(buf: &mut Vec<u8>, bag: &PlaceBag) {
    encode_u32(buf, bag.support_len() as u32);
    for (place, k) in bag.iter() {
        encode_u32(buf, place.0);
        buf.extend_from_slice(&k.to_le_bytes());
    }
}

impl fmt::Display for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.net, self.marking)
    }
}

impl fmt::Debug for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Canonical encoding of a [`SystemState`], used as the visited-set key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey(Vec<u8>);

impl StateKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}
