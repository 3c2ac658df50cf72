//! Block-parallel FIR execution through polyphase decomposition.
//!
//! A length-`M` filter is split into `L` phases (`L` = 2 or 3), each of
//! length `⌈M/L⌉`. Input is consumed `L` samples at a time and each block
//! produces `L` outputs.
//!
//! The 2-parallel structure evaluates four subfilter products per block:
//!
//! ```text
//! Y_even = H_even X_even + z⁻² H_odd X_odd
//! Y_odd  = H_odd X_even  + H_even X_odd
//! ```
//!
//! The 3-parallel structure shares subexpressions so that only six products
//! are needed for three outputs (instead of nine):
//!
//! ```text
//! Y0 = H0X0 − z⁻³ H2X2 + z⁻³ [(H1+H2)(X1+X2) − H1X1]
//! Y1 = [(H0+H1)(X0+X1) − H1X1] − [H0X0 − z⁻³ H2X2]
//! Y2 = (H0+H1+H2)(X0+X1+X2) − [(H0+H1)(X0+X1) − H1X1] − [(H1+H2)(X1+X2) − H1X1]
//! ```
//!
//! Both produce the same samples as serial causal convolution. At the
//! decimated rate `z⁻²` (order 2) and `z⁻³` (order 3) are a one-block delay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wiener::FirFilter;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyphaseBank {
    order: usize,
    subfilters: Vec<Vec<f64>>,
    source_length: usize,
}

impl PolyphaseBank {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn subfilters(&self) -> &[Vec<f64>] {
        &self.subfilters
    }

    pub fn source_length(&self) -> usize {
        self.source_length
    }

    /// Length of every (zero-padded) phase.
    pub fn phase_len(&self) -> usize {
        self.subfilters[0].len()
    }

    /// Reassembles the original coefficients.
    pub fn interleave(&self) -> Vec<f64> {
        let mut h = Vec::with_capacity(self.order * self.phase_len());
        for i in 0..self.phase_len() {
            for phase in &self.subfilters {
                h.push(phase[i]);
            }
        }
        h.truncate(self.source_length);
        h
    }
}

/// Splits `h` into `order` phases: phase `p` holds `h[p], h[p+order], …`.
pub fn decompose(h: &[f64], order: usize) -> Result<PolyphaseBank> {
    if !(2..=3).contains(&order) {
        return Err(Error::param(format!(
            "parallel order must be 2 or 3, got {order}"
        )));
    }
    if h.is_empty() {
        return Err(Error::param("cannot decompose an empty filter"));
    }
    let phase_len = h.len().div_ceil(order);
    let subfilters = (0..order)
        .map(|p| {
            (0..phase_len)
                .map(|i| h.get(p + i * order).copied().unwrap_or(0.0))
                .collect()
        })
        .collect();
    Ok(PolyphaseBank {
        order,
        subfilters,
        source_length: h.len(),
    })
}

/// Multiply-accumulate cost of one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacCount {
    pub per_block: u64,
    pub outputs_per_block: u64,
}

impl MacCount {
    pub fn serial(m: usize) -> Self {
        MacCount {
            per_block: m as u64,
            outputs_per_block: 1,
        }
    }

    pub fn per_output(&self) -> f64 {
        self.per_block as f64 / self.outputs_per_block as f64
    }

    /// Exact per-output count when it is an integer.
    pub fn per_output_exact(&self) -> Option<u64> {
        (self.per_block % self.outputs_per_block == 0)
            .then_some(self.per_block / self.outputs_per_block)
    }
}

/// Input history of one subfilter branch, newest sample first.
#[derive(Debug, Clone)]
struct DelayLine {
    buf: Vec<f64>,
    head: usize,
}

impl DelayLine {
    fn new(len: usize) -> Self {
        DelayLine {
            buf: vec![0.0; len],
            head: 0,
        }
    }

    fn push(&mut self, v: f64) {
        self.head = if self.head == 0 {
            self.buf.len() - 1
        } else {
            self.head - 1
        };
        self.buf[self.head] = v;
    }

    /// `Σ taps[i] · x[n−i]`.
    fn dot(&self, taps: &[f64]) -> f64 {
        let (wrapped, recent) = self.buf.split_at(self.head);
        let (taps_recent, taps_wrapped) = taps.split_at(recent.len());
        recent.iter().zip(taps_recent).map(|(x, h)| x * h).sum::<f64>()
            + wrapped.iter().zip(taps_wrapped).map(|(x, h)| x * h).sum::<f64>()
    }

    fn clear(&mut self) {
        self.buf.iter_mut().for_each(|v| *v = 0.0);
        self.head = 0;
    }
}

/// Streaming 2- or 3-parallel FIR engine.
///
/// Each branch pairs a (possibly pre-added) subfilter with its own input
/// history, so the products of one block only read block inputs and branch
/// state.
#[derive(Debug, Clone)]
pub struct BlockFirEngine {
    bank: PolyphaseBank,
    branch_taps: Vec<Vec<f64>>,
    histories: Vec<DelayLine>,
    /// Products of the previous block that feed the one-block delays.
    delayed: [f64; 2],
    mac_count: u64,
}

impl BlockFirEngine {
    pub fn new(filter: &FirFilter, order: usize) -> Result<Self> {
        let bank = decompose(filter.coefficients(), order)?;
        Ok(Self::from_bank(bank))
    }

    pub fn from_bank(bank: PolyphaseBank) -> Self {
        let sub = &bank.subfilters;
        let branch_taps: Vec<Vec<f64>> = match bank.order {
            // H_even·X_even, H_odd·X_odd, H_odd·X_even, H_even·X_odd
            2 => vec![
                sub[0].clone(),
                sub[1].clone(),
                sub[1].clone(),
                sub[0].clone(),
            ],
            // H0X0, H1X1, H2X2, (H0+H1)(X0+X1), (H1+H2)(X1+X2), (H0+H1+H2)(X0+X1+X2)
            3 => vec![
                sub[0].clone(),
                sub[1].clone(),
                sub[2].clone(),
                add(&sub[0], &sub[1]),
                add(&sub[1], &sub[2]),
                add(&add(&sub[0], &sub[1]), &sub[2]),
            ],
            _ => unreachable!("decompose only builds order 2 or 3"),
        };
        // order 2 branches share two input streams; order 3 has six distinct ones
        let streams = if bank.order == 2 { 2 } else { 6 };
        let histories = (0..streams)
            .map(|_| DelayLine::new(bank.phase_len()))
            .collect();
        BlockFirEngine {
            bank,
            branch_taps,
            histories,
            delayed: [0.0; 2],
            mac_count: 0,
        }
    }

    pub fn order(&self) -> usize {
        self.bank.order
    }

    pub fn bank(&self) -> &PolyphaseBank {
        &self.bank
    }

    pub fn block_size(&self) -> usize {
        self.bank.order
    }

    /// Total multiply-accumulates performed since construction or reset.
    pub fn mac_count(&self) -> u64 {
        self.mac_count
    }

    pub fn reset(&mut self) {
        self.histories.iter_mut().for_each(DelayLine::clear);
        self.delayed = [0.0; 2];
        self.mac_count = 0;
    }

    pub fn mac_per_block(&self) -> MacCount {
        mac_per_block(self.bank.source_length, self.bank.order)
    }

    /// Number of subfilter products evaluated per block.
    pub fn branch_count(&self) -> usize {
        self.branch_taps.len()
    }

    /// Consumes one block of `order` inputs and writes `order` outputs.
    pub fn process_block(&mut self, input: &[f64], output: &mut [f64]) {
        let order = self.bank.order;
        assert_eq!(input.len(), order, "block input must hold {order} samples");
        assert_eq!(output.len(), order, "block output must hold {order} samples");
        self.push_inputs(input);
        if order == 2 {
            let p: [f64; 4] = std::array::from_fn(|b| self.branch_product(b));
            self.combine2(&p, output);
        } else {
            let p: [f64; 6] = std::array::from_fn(|b| self.branch_product(b));
            self.combine3(&p, output);
        }
    }

    /// Resets the engine and filters `x`, zero-padding the tail to a whole
    /// block and trimming the padding from the result.
    pub fn run(&mut self, x: &[f64]) -> Vec<f64> {
        self.reset();
        let order = self.bank.order;
        let blocks = x.len().div_ceil(order);
        let mut out = vec![0.0; blocks * order];
        let mut block = vec![0.0; order];
        for (b, chunk) in out.chunks_exact_mut(order).enumerate() {
            block.iter_mut().for_each(|v| *v = 0.0);
            let start = b * order;
            let end = (start + order).min(x.len());
            block[..end - start].copy_from_slice(&x[start..end]);
            self.process_block(&block, chunk);
        }
        out.truncate(x.len());
        out
    }

    fn push_inputs(&mut self, input: &[f64]) {
        if self.bank.order == 2 {
            self.histories[0].push(input[0]);
            self.histories[1].push(input[1]);
        } else {
            let (x0, x1, x2) = (input[0], input[1], input[2]);
            let streams = [x0, x1, x2, x0 + x1, x1 + x2, x0 + x1 + x2];
            for (line, v) in self.histories.iter_mut().zip(streams) {
                line.push(v);
            }
        }
    }

    fn stream_of(&self, branch: usize) -> usize {
        if self.bank.order == 2 {
            // branches 0,2 read X_even; 1,3 read X_odd
            branch % 2
        } else {
            branch
        }
    }

    /// One subfilter product. Reads block inputs and branch state only.
    fn branch_product(&mut self, branch: usize) -> f64 {
        let taps = &self.branch_taps[branch];
        self.mac_count += taps.len() as u64;
        self.histories[self.stream_of(branch)].dot(taps)
    }

    fn combine2(&mut self, p: &[f64; 4], out: &mut [f64]) {
        let [ee, oo, oe, eo] = *p;
        out[0] = ee + self.delayed[0];
        out[1] = oe + eo;
        self.delayed[0] = oo;
    }

    fn combine3(&mut self, p: &[f64; 6], out: &mut [f64]) {
        let [p0, p1, p2, p01, p12, p012] = *p;
        let [prev_p2, prev_cross] = self.delayed;
        let cross = p12 - p1;
        let head = p0 - prev_p2;
        let mid = p01 - p1;
        out[0] = head + prev_cross;
        out[1] = mid - head;
        out[2] = p012 - mid - cross;
        self.delayed = [p2, cross];
    }
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Closed-form block cost: four length-`⌈M/2⌉` products per two outputs, or
/// six length-`⌈M/3⌉` products per three outputs.
pub fn mac_per_block(m: usize, order: usize) -> MacCount {
    match order {
        2 => MacCount {
            per_block: 4 * m.div_ceil(2) as u64,
            outputs_per_block: 2,
        },
        3 => MacCount {
            per_block: 6 * m.div_ceil(3) as u64,
            outputs_per_block: 3,
        },
        _ => MacCount::serial(m),
    }
}

pub fn run2(engine: &mut BlockFirEngine, x: &[f64]) -> Result<Vec<f64>> {
    if engine.order() != 2 {
        return Err(Error::param("run2 needs a 2-parallel engine"));
    }
    Ok(engine.run(x))
}

pub fn run3(engine: &mut BlockFirEngine, x: &[f64]) -> Result<Vec<f64>> {
    if engine.order() != 3 {
        return Err(Error::param("run3 needs a 3-parallel engine"));
    }
    Ok(engine.run(x))
}

/// Filters `x` serially (`order` 1) or through a block engine.
pub fn apply_parallel(filter: &FirFilter, x: &[f64], order: usize) -> Result<Vec<f64>> {
    match order {
        1 => Ok(crate::wiener::apply(filter, x)),
        2 | 3 => Ok(BlockFirEngine::new(filter, order)?.run(x)),
        _ => Err(Error::param(format!(
            "parallel order must be 1, 2 or 3, got {order}"
        ))),
    }
}
