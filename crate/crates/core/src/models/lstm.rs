use mpe_autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use rand::Rng;

use super::{uniform_matrix, ModelError};

/// Parameter ids of one LSTM. Gates are laid out as `[i | f | o | g]` along
/// the `4k` axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmWeights {
    /// `[d, 4k]`
    pub wx: ParamId,
    /// `[k, 4k]`
    pub wh: ParamId,
    /// `[4k]`
    pub b: ParamId,
}

/// The weights of an [`LstmWeights`] placed on a tape.
#[derive(Clone, Copy, Debug)]
pub struct CellVars {
    pub wx: Var,
    pub wh: Var,
    pub b: Var,
}

impl LstmWeights {
    /// Glorot-uniform matrices, zero bias except a forget-gate bias of 1.
    pub fn init<R: Rng>(store: &mut ParamStore, prefix: &str, d: usize, k: usize, rng: &mut R) -> Result<Self, ModelError> {
        let wx = store.add(format!("{prefix}.wx"), uniform_matrix(rng, d, 4 * k), true)?;
        let wh = store.add(format!("{prefix}.wh"), uniform_matrix(rng, k, 4 * k), true)?;
        let mut b = vec![0.0; 4 * k];
        b[k..2 * k].fill(1.0);
        let b = store.add(format!("{prefix}.b"), Tensor::vector(b), true)?;
        Ok(LstmWeights { wx, wh, b })
    }

    pub fn lookup(store: &ParamStore, prefix: &str) -> Result<Self, ModelError> {
        Ok(LstmWeights {
            wx: store.id(&format!("{prefix}.wx"))?,
            wh: store.id(&format!("{prefix}.wh"))?,
            b: store.id(&format!("{prefix}.b"))?,
        })
    }

    pub fn vars(&self, tape: &mut Tape, store: &ParamStore) -> CellVars {
        CellVars {
            wx: tape.param(store, self.wx),
            wh: tape.param(store, self.wh),
            b: tape.param(store, self.b),
        }
    }
}

/// Gate update from the input projection `pre = x Wx + b`.
fn step(tape: &mut Tape, pre: Var, h: Var, c: Var, wh: Var) -> Result<(Var, Var), ModelError> {
    let k = tape.value(h).len();
    let rec = tape.matmul(h, wh)?;
    let z = tape.add(pre, rec)?;
    let zi = tape.slice(z, 0, k)?;
    let zf = tape.slice(z, k, 2 * k)?;
    let zo = tape.slice(z, 2 * k, 3 * k)?;
    let zg = tape.slice(z, 3 * k, 4 * k)?;
    let i = tape.sigmoid(zi);
    let f = tape.sigmoid(zf);
    let o = tape.sigmoid(zo);
    let g = tape.tanh(zg);
    let keep = tape.mul(f, c)?;
    let write = tape.mul(i, g)?;
    let c_next = tape.add(keep, write)?;
    let squashed = tape.tanh(c_next);
    let h_next = tape.mul(o, squashed)?;
    Ok((h_next, c_next))
}

/// One LSTM step:
///
/// ```text
/// [i f o g] = [σ σ σ tanh](x Wx + h Wh + b)
/// c' = f ⊙ c + i ⊙ g
/// h' = o ⊙ tanh(c')
/// ```
pub fn lstm_cell(tape: &mut Tape, x: Var, h: Var, c: Var, cell: &CellVars) -> Result<(Var, Var), ModelError> {
    let proj = tape.matmul(x, cell.wx)?;
    let pre = tape.add(proj, cell.b)?;
    step(tape, pre, h, c, cell.wh)
}

/// Runs the LSTM over the rows of `xs` (`[T, d]`), returning every hidden
/// state and the final cell state.
pub fn run_lstm(tape: &mut Tape, xs: Var, h0: Var, c0: Var, cell: &CellVars) -> Result<(Vec<Var>, Var), ModelError> {
    let steps = tape.value(xs).shape()[0];
    let proj = tape.matmul(xs, cell.wx)?;
    let pre_all = tape.add_rows(proj, cell.b)?;
    let (mut h, mut c) = (h0, c0);
    let mut hs = Vec::with_capacity(steps);
    for t in 0..steps {
        let pre = tape.embedding(pre_all, t)?;
        (h, c) = step(tape, pre, h, c, cell.wh)?;
        hs.push(h);
    }
    Ok((hs, c))
}
