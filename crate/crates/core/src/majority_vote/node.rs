use super::wire::WorkerMessage;
use crate::error::{Error, Result};
use crate::oracles::StochasticGradOracle;
use crate::rng::RngStream;
use crate::sign::{sign_bit, stochastic_sign};
use crate::vector::{norm_linf, project_l2, DenseVector};

/// Worker-local state: its replica of `x`, its estimator and its stream.
#[derive(Clone, Debug)]
pub struct NodeState {
    pub node_id: u32,
    /// `v_t^j`; `None` before the first round.
    pub v: Option<DenseVector>,
    /// Replicated decision variable.
    pub x: DenseVector,
    x_prev: Option<DenseVector>,
    pub rng: RngStream,
}

impl NodeState {
    pub fn new(node_id: u32, x1: DenseVector, rng: RngStream) -> Self {
        NodeState {
            node_id,
            v: None,
            x: x1,
            x_prev: None,
            rng,
        }
    }

    pub fn estimator(&self) -> Result<&DenseVector> {
        self.v.as_ref().ok_or_else(|| {
            Error::InvalidInput(format!("node {} has no estimator yet", self.node_id))
        })
    }
}

/// Advances the node estimator at its current `x`, with one sample:
///
/// `v_t = grad f_j(x_t; xi) + (1 - beta) (v_{t-1} - grad f_j(x_{t-1}; xi))`,
/// and `v_1 = grad f_j(x_1; xi)` on the first call.
pub fn node_step(
    state: &mut NodeState,
    oracle: &dyn StochasticGradOracle,
    beta: f64,
) -> Result<()> {
    let d = oracle.dim();
    state.x.ensure_dim(d)?;
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Config(format!(
            "beta must lie in (0, 1], got {beta}"
        )));
    }
    let sample = oracle.draw_sample(&mut state.rng);
    let g_now = oracle.grad_at_sample(&state.x, &sample);
    let v = match (&state.v, &state.x_prev) {
        (Some(v_prev), Some(x_prev)) => {
            v_prev.ensure_dim(d)?;
            let g_prev = oracle.grad_at_sample(x_prev, &sample);
            let keep = 1.0 - beta;
            DenseVector::from_fn(d, |k| g_now[k] + keep * (v_prev[k] - g_prev[k]))
        }
        _ => g_now,
    };
    state.v = Some(v);
    state.x_prev = Some(state.x.clone());
    Ok(())
}

/// Uplink with `S_R(v)`, `R = 4G`. An estimator outside `[-4G, 4G]` is a
/// protocol error: it means the gradient bound or `beta = 1/2` was violated.
pub fn worker_encode_option1(
    state: &mut NodeState,
    g_bound: f64,
    round: u64,
) -> Result<WorkerMessage> {
    let radius = 4.0 * g_bound;
    let v = state.estimator()?;
    let norm = norm_linf(v);
    if norm > radius {
        return Err(Error::Protocol {
            round,
            node: Some(state.node_id),
            detail: format!("||v||_inf = {norm} exceeds R = 4G = {radius}"),
        });
    }
    let v = v.clone();
    let payload = stochastic_sign(&v, radius, &mut state.rng)?;
    Ok(WorkerMessage {
        round,
        node_id: state.node_id,
        payload,
    })
}

/// Uplink with `S_G(Pi_G(v))`. The projection keeps `||v||_inf <= G`, so the
/// stochastic sign is always well defined.
pub fn worker_encode_option2(
    state: &mut NodeState,
    g_bound: f64,
    round: u64,
) -> Result<WorkerMessage> {
    let projected = project_l2(state.estimator()?, g_bound)?;
    let payload = stochastic_sign(&projected, g_bound, &mut state.rng)?;
    Ok(WorkerMessage {
        round,
        node_id: state.node_id,
        payload,
    })
}

/// Uplink of the deterministic double-sign baseline: `sign(v)` with ties to +1.
pub fn worker_encode_sign(state: &NodeState, round: u64) -> Result<WorkerMessage> {
    Ok(WorkerMessage {
        round,
        node_id: state.node_id,
        payload: sign_bit(state.estimator()?)?,
    })
}
