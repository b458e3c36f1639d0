//! Thread-safe wrapper of the motion buffer for one producer and one
//! consumer.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;

use steer_core::primitive::{FrameBuffer, Popped};

/// A [`FrameBuffer`] behind a mutex, with counters mirrored into atomics so
/// that status reporting never takes the lock.
#[derive(Debug)]
pub struct SharedMotionBuffer<T: Clone> {
    inner: Mutex<FrameBuffer<T>>,
    depth: AtomicUsize,
    underruns: AtomicU64,
    overruns: AtomicU64,
    pushes: AtomicU64,
}

impl<T: Clone> SharedMotionBuffer<T> {
    pub fn new(capacity_blocks: usize, neutral: T) -> Self {
        Self {
            inner: Mutex::new(FrameBuffer::new(capacity_blocks, neutral)),
            depth: AtomicUsize::new(0),
            underruns: AtomicU64::new(0),
            overruns: AtomicU64::new(0),
            pushes: AtomicU64::new(0),
        }
    }

    fn sync(&self, b: &FrameBuffer<T>) {
        self.depth.store(b.depth(), Ordering::Release);
        self.underruns.store(b.underrun_count(), Ordering::Release);
        self.overruns.store(b.overrun_count(), Ordering::Release);
    }

    pub fn push_block(&self, block: Vec<T>) {
        let mut b = self.inner.lock().expect("buffer lock");
        b.push_block(block);
        self.pushes.fetch_add(1, Ordering::AcqRel);
        self.sync(&b);
    }

    pub fn pop_frame(&self) -> Popped<T> {
        let mut b = self.inner.lock().expect("buffer lock");
        let p = b.pop_frame();
        self.sync(&b);
        p
    }

    /// Frames currently queued.
    pub fn depth(&self) -> usize {
        self.depth.load(Ordering::Acquire)
    }

    pub fn underrun_count(&self) -> u64 {
        self.underruns.load(Ordering::Acquire)
    }

    pub fn overrun_count(&self) -> u64 {
        self.overruns.load(Ordering::Acquire)
    }

    /// Blocks pushed so far.
    pub fn push_count(&self) -> u64 {
        self.pushes.load(Ordering::Acquire)
    }
}
