use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::T_FUTURE;

/// Default capacity in blocks.
pub const DEFAULT_BUFFER_BLOCKS: usize = 3;

/// A popped frame. `held` is set when the buffer was empty and the frame
/// is a repeat of the previous one (or the neutral frame).
#[derive(Debug, Clone, PartialEq)]
pub struct Popped<T> {
    pub frame: T,
    pub held: bool,
}

/// Bounded FIFO of frame blocks between a block producer and a per-frame
/// consumer.
///
/// Popping an empty buffer repeats the last frame handed out (initially a
/// neutral frame) and counts an underrun. Pushing into a full buffer
/// discards the oldest queued block and counts an overrun.
#[derive(Debug, Clone)]
pub struct FrameBuffer<T> {
    blocks: VecDeque<VecDeque<T>>,
    capacity_blocks: usize,
    last: T,
    underruns: u64,
    overruns: u64,
    popped: u64,
}

impl<T: Clone> FrameBuffer<T> {
    /// `capacity_blocks` is clamped to at least one.
    pub fn new(capacity_blocks: usize, neutral: T) -> Self {
        Self {
            blocks: VecDeque::new(),
            capacity_blocks: capacity_blocks.max(1),
            last: neutral,
            underruns: 0,
            overruns: 0,
            popped: 0,
        }
    }

    pub fn push_block(&mut self, block: Vec<T>) {
        if block.is_empty() {
            return;
        }
        if self.blocks.len() == self.capacity_blocks {
            self.blocks.pop_front();
            self.overruns += 1;
        }
        self.blocks.push_back(block.into());
    }

    pub fn pop_frame(&mut self) -> Popped<T> {
        self.popped += 1;
        while let Some(front) = self.blocks.front_mut() {
            if let Some(f) = front.pop_front() {
                if front.is_empty() {
                    self.blocks.pop_front();
                }
                self.last = f.clone();
                return Popped {
                    frame: f,
                    held: false,
                };
            }
            self.blocks.pop_front();
        }
        self.underruns += 1;
        Popped {
            frame: self.last.clone(),
            held: true,
        }
    }

    /// Queued frames.
    pub fn depth(&self) -> usize {
        self.blocks.iter().map(VecDeque::len).sum()
    }

    pub fn depth_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn capacity_blocks(&self) -> usize {
        self.capacity_blocks
    }

    pub fn underrun_count(&self) -> u64 {
        self.underruns
    }

    pub fn overrun_count(&self) -> u64 {
        self.overruns
    }

    pub fn pop_count(&self) -> u64 {
        self.popped
    }
}

/// Discrete-event schedule of one producer and one consumer on ideal
/// integer-microsecond clocks.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSimConfig {
    pub duration_us: u64,
    pub frame_period_us: u64,
    pub frames_per_block: usize,
    pub capacity_blocks: usize,
    /// Producer steps (0-based) that produce nothing.
    pub stalled_steps: Vec<u64>,
}

impl Default for RateSimConfig {
    fn default() -> Self {
        Self {
            duration_us: 60_000_000,
            frame_period_us: 20_000,
            frames_per_block: T_FUTURE,
            capacity_blocks: DEFAULT_BUFFER_BLOCKS,
            stalled_steps: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateReport {
    pub frames: u64,
    pub generator_steps: u64,
    pub underruns: u64,
    pub overruns: u64,
    /// Consumer tick indices that were served by a held frame.
    pub held_ticks: Vec<u64>,
}

/// Runs the producer every `frames_per_block * frame_period_us` and the
/// consumer every `frame_period_us` over `[0, duration_us)`. At equal
/// timestamps the producer runs first.
pub fn simulate_rates(config: &RateSimConfig) -> RateReport {
    let block_period = config.frame_period_us * config.frames_per_block as u64;
    let mut buf = FrameBuffer::new(config.capacity_blocks, 0u64);
    let mut report = RateReport {
        frames: 0,
        generator_steps: 0,
        underruns: 0,
        overruns: 0,
        held_ticks: Vec::new(),
    };
    if config.frame_period_us == 0 || block_period == 0 {
        return report;
    }
    let mut step = 0u64;
    let mut tick = 0u64;
    loop {
        let t_prod = step * block_period;
        let t_cons = tick * config.frame_period_us;
        if t_prod >= config.duration_us && t_cons >= config.duration_us {
            break;
        }
        if t_prod <= t_cons && t_prod < config.duration_us {
            if !config.stalled_steps.contains(&step) {
                let base = step * config.frames_per_block as u64;
                buf.push_block((0..config.frames_per_block as u64).map(|i| base + i).collect());
                report.generator_steps += 1;
            }
            step += 1;
        } else {
            if buf.pop_frame().held {
                report.held_ticks.push(tick);
            }
            report.frames += 1;
            tick += 1;
        }
    }
    report.underruns = buf.underrun_count();
    report.overruns = buf.overrun_count();
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_hold_and_drop() {
        let mut b = FrameBuffer::new(2, -1);
        assert_eq!(b.pop_frame(), Popped { frame: -1, held: true });
        b.push_block(alloc::vec![1, 2]);
        b.push_block(alloc::vec![3, 4]);
        b.push_block(alloc::vec![5, 6]);
        assert_eq!(b.overrun_count(), 1);
        assert_eq!(b.depth(), 4);
        let got: Vec<i32> = (0..4).map(|_| b.pop_frame().frame).collect();
        assert_eq!(got, [3, 4, 5, 6]);
        assert_eq!(b.pop_frame(), Popped { frame: 6, held: true });
        assert_eq!(b.underrun_count(), 2);
    }

    #[test]
    fn ideal_clocks_never_underrun() {
        let r = simulate_rates(&RateSimConfig::default());
        assert_eq!((r.frames, r.generator_steps, r.underruns), (3000, 375, 0));
    }

    #[test]
    fn one_stall_costs_one_block() {
        let r = simulate_rates(&RateSimConfig {
            stalled_steps: alloc::vec![10],
            ..Default::default()
        });
        assert_eq!(r.underruns, 8);
        assert_eq!(r.held_ticks, (80..88).collect::<Vec<_>>());
    }
}
