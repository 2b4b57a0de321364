//! Interleaving firing semantics: `m' = m + O(t) - I(t)`.

use thiserror::Error;

use crate::bag::BagError;
use crate::net::{SystemState, TranId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FireError {
    #[error("transition {0} is not in the net")]
    UnknownTransition(TranId),
    #[error("transition {0} is not enabled")]
    Disabled(TranId),
    #[error(transparent)]
    Bag(#[from] BagError),
}

/// Fires `tr`; the net is unchanged.
pub fn fire(state: &SystemState, tr: TranId) -> Result<SystemState, FireError> {
    match state.enabled(tr) {
        None => Err(FireError::UnknownTransition(tr)),
        Some(false) => Err(FireError::Disabled(tr)),
        Some(true) => fire_unchecked(state, tr),
    }
}

fn fire_unchecked(state: &SystemState, tr: TranId) -> Result<SystemState, FireError> {
    let q = state
        .net()
        .get(tr)
        .ok_or(FireError::UnknownTransition(tr))?;
    let marking = state.marking().sum(&q.output)?.diff(&q.input);
    Ok(state.with_marking(marking))
}

/// Every `(t, fire(s, t))` for enabled `t`, in transition order.
pub fn firing_successors(state: &SystemState) -> Result<Vec<(TranId, SystemState)>, FireError> {
    state
        .enabled_transitions()
        .map(|tr| fire_unchecked(state, tr).map(|next| (tr, next)))
        .collect()
}
