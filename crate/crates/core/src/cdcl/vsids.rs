//! VSIDS variable activities with a binary max-heap.
//!
//! Bumps add `increment`; decay divides `increment` by the decay factor
//! instead of scaling every score. When a score exceeds the scalar's rescale
//! limit, all scores and the increment are multiplied by its reciprocal.
//! Heap order is (activity descending, variable index ascending), so ties go
//! to the lowest variable.

use crate::scalar::Activity;

const NOT_IN_HEAP: usize = usize::MAX;

#[derive(Clone, Debug)]
pub struct Vsids<A: Activity> {
    activity: Vec<A>,
    increment: A,
    decay: A,
    heap: Vec<u32>,
    position: Vec<usize>,
}

impl<A: Activity> Vsids<A> {
    /// All variables start in the heap with activity zero.
    pub fn new(num_vars: usize, decay: f64) -> Vsids<A> {
        Vsids {
            activity: vec![A::zero(); num_vars],
            increment: A::one(),
            decay: A::from_f64(decay),
            heap: (0..num_vars as u32).collect(),
            position: (0..num_vars).collect(),
        }
    }

    pub fn activity(&self, var: usize) -> A {
        self.activity[var]
    }

    pub fn contains(&self, var: usize) -> bool {
        self.position[var] != NOT_IN_HEAP
    }

    pub fn bump(&mut self, var: usize) {
        self.activity[var] = self.activity[var] + self.increment;
        if self.activity[var] > A::rescale_limit() {
            self.rescale();
        }
        if self.contains(var) {
            self.sift_up(self.position[var]);
        }
    }

    pub fn decay(&mut self) {
        self.increment = self.increment / self.decay;
        if self.increment > A::rescale_limit() {
            self.rescale();
        }
    }

    fn rescale(&mut self) {
        let factor = A::rescale_limit().recip();
        for a in &mut self.activity {
            *a = *a * factor;
        }
        self.increment = self.increment * factor;
    }

    pub fn insert(&mut self, var: usize) {
        if self.contains(var) {
            return;
        }
        self.position[var] = self.heap.len();
        self.heap.push(var as u32);
        self.sift_up(self.heap.len() - 1);
    }

    pub fn peek(&self) -> Option<usize> {
        self.heap.first().map(|&v| v as usize)
    }

    pub fn pop(&mut self) -> Option<usize> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        self.position[top as usize] = NOT_IN_HEAP;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.position[last as usize] = 0;
            self.sift_down(0);
        }
        Some(top as usize)
    }

    #[inline]
    fn before(&self, a: u32, b: u32) -> bool {
        let (x, y) = (self.activity[a as usize], self.activity[b as usize]);
        x > y || (x == y && a < b)
    }

    fn sift_up(&mut self, mut i: usize) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            if !self.before(v, self.heap[parent]) {
                break;
            }
            self.heap[i] = self.heap[parent];
            self.position[self.heap[i] as usize] = i;
            i = parent;
        }
        self.heap[i] = v;
        self.position[v as usize] = i;
    }

    fn sift_down(&mut self, mut i: usize) {
        let v = self.heap[i];
        let len = self.heap.len();
        loop {
            let left = 2 * i + 1;
            if left >= len {
                break;
            }
            let right = left + 1;
            let child = if right < len && self.before(self.heap[right], self.heap[left]) {
                right
            } else {
                left
            };
            if !self.before(self.heap[child], v) {
                break;
            }
            self.heap[i] = self.heap[child];
            self.position[self.heap[i] as usize] = i;
            i = child;
        }
        self.heap[i] = v;
        self.position[v as usize] = i;
    }
}
