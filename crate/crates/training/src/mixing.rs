//! Batch streams. The joint stream picks the source pool of each
//! micro-batch independently: translation with probability `lambda`,
//! generation otherwise. Each pool cycles through its own per-epoch shuffles,
//! driven by a random stream that the task draws never touch, so at
//! `lambda = 1` (or 0) the stream is exactly the single-task stream.

use diglossia_core::rng::{self, Rng};
use diglossia_core::{ChatExample, Task};
use diglossia_model::{Encoded, Tokenizer};
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::{Result, TrainError};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub id: String,
    pub task: Task,
    pub enc: Encoded,
}

pub fn encode_pool(chats: &[ChatExample], tokenizer: &Tokenizer, max_len: usize) -> Result<Vec<TrainExample>> {
    chats
        .iter()
        .map(|c| {
            Ok(TrainExample {
                id: c.id().to_string(),
                task: c.task,
                enc: tokenizer.encode_chat(c, max_len)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MicroBatch {
    pub task: Task,
    pub examples: Vec<TrainExample>,
}

impl MicroBatch {
    pub fn encoded(&self) -> Vec<Encoded> {
        self.examples.iter().map(|e| e.enc.clone()).collect()
    }

    pub fn ids(&self) -> String {
        self.examples.iter().map(|e| e.id.as_str()).collect::<Vec<_>>().join(",")
    }
}

pub trait BatchStream {
    fn next_batch(&mut self) -> MicroBatch;
}

fn pool_label(task: Task) -> u64 {
    match task {
        Task::Mt => rng::label("pool-mt"),
        Task::Gen => rng::label("pool-gen"),
    }
}

/// Endless walk over one pool, reshuffled at the start of every epoch.
#[derive(Debug, Clone)]
pub struct PoolCycle<'a> {
    task: Task,
    pool: &'a [TrainExample],
    order: Vec<usize>,
    pos: usize,
    epoch: usize,
    batch_size: usize,
    rng: Rng,
}

impl<'a> PoolCycle<'a> {
    pub fn new(task: Task, pool: &'a [TrainExample], batch_size: usize, seed: u64) -> Result<Self> {
        if pool.is_empty() {
            return Err(TrainError::EmptyPool(match task {
                Task::Mt => "translation",
                Task::Gen => "generation",
            }));
        }
        let mut rng = rng::stream(seed, pool_label(task));
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.shuffle(&mut rng);
        Ok(PoolCycle {
            task,
            pool,
            order,
            pos: 0,
            epoch: 0,
            batch_size,
            rng,
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    fn take(&mut self) -> MicroBatch {
        let mut examples = Vec::with_capacity(self.batch_size);
        while examples.len() < self.batch_size {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
                self.epoch += 1;
            }
            examples.push(self.pool[self.order[self.pos]].clone());
            self.pos += 1;
        }
        MicroBatch {
            task: self.task,
            examples,
        }
    }
}

impl BatchStream for PoolCycle<'_> {
    fn next_batch(&mut self) -> MicroBatch {
        self.take()
    }
}

#[derive(Debug, Clone)]
pub struct MixStream<'a> {
    lambda: f64,
    task_rng: Rng,
    mt: Option<PoolCycle<'a>>,
    gen: Option<PoolCycle<'a>>,
}

impl<'a> MixStream<'a> {
    pub fn new(
        mt: &'a [TrainExample],
        gen: &'a [TrainExample],
        lambda: f64,
        batch_size: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(TrainError::Config(format!("lambda must be in [0, 1], got {lambda}")));
        }
        let mt = if lambda > 0.0 {
            Some(PoolCycle::new(Task::Mt, mt, batch_size, seed)?)
        } else {
            None
        };
        let gen = if lambda < 1.0 {
            Some(PoolCycle::new(Task::Gen, gen, batch_size, seed)?)
        } else {
            None
        };
        Ok(MixStream {
            lambda,
            task_rng: rng::stream(seed, rng::label("mix-task")),
            mt,
            gen,
        })
    }
}

impl BatchStream for MixStream<'_> {
    fn next_batch(&mut self) -> MicroBatch {
        let u: f64 = self.task_rng.random();
        let pool = if u < self.lambda { &mut self.mt } else { &mut self.gen };
        pool.as_mut().expect("pool required by lambda is present").take()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(task: Task, n: usize) -> Vec<TrainExample> {
        (0..n)
            .map(|i| TrainExample {
                id: format!("{task}-{i}"),
                task,
                enc: Encoded::new(vec![0, 1, 2], vec![false, false, true]),
            })
            .collect()
    }

    #[test]
    fn endpoints_are_single_task() {
        let mt = pool(Task::Mt, 5);
        let gen = pool(Task::Gen, 7);
        let mut one = MixStream::new(&mt, &gen, 1.0, 2, 3).unwrap();
        let mut zero = MixStream::new(&mt, &gen, 0.0, 2, 3).unwrap();
        for _ in 0..50 {
            assert_eq!(one.next_batch().task, Task::Mt);
            assert_eq!(zero.next_batch().task, Task::Gen);
        }
    }

    #[test]
    fn half_mix_fraction() {
        let mt = pool(Task::Mt, 5);
        let gen = pool(Task::Gen, 7);
        let mut s = MixStream::new(&mt, &gen, 0.5, 1, 42).unwrap();
        let n = 10_000;
        let mt_count = (0..n).filter(|_| s.next_batch().task == Task::Mt).count();
        let frac = mt_count as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn each_epoch_visits_every_example_once() {
        let mt = pool(Task::Mt, 6);
        let mut c = PoolCycle::new(Task::Mt, &mt, 3, 1).unwrap();
        let mut seen: Vec<String> = (0..2).flat_map(|_| c.next_batch().examples).map(|e| e.id).collect();
        seen.sort();
        let mut want: Vec<String> = mt.iter().map(|e| e.id.clone()).collect();
        want.sort();
        assert_eq!(seen, want);
    }

    #[test]
    fn missing_pool_is_an_error() {
        let gen = pool(Task::Gen, 3);
        assert!(matches!(MixStream::new(&[], &gen, 0.5, 1, 0), Err(TrainError::EmptyPool(_))));
        assert!(MixStream::new(&[], &gen, 0.0, 1, 0).is_ok());
    }
}
