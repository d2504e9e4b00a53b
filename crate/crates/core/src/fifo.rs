//! Dual-clock FIFO with synchronizer-delayed pointer views.
//!
//! Each side updates its own pointer immediately but sees the other side's
//! pointer only after it has crossed a synchronizer into its own domain.
//! The writer therefore over-estimates occupancy and the reader
//! under-estimates it, and both stall conservatively.
//!
//! Pointers cross as whole counts (one event per push or pop), abstracting
//! the gray-coded encoding a real design would use.

use std::collections::VecDeque;

use thiserror::Error;

use crate::clocks::{sync_observe, ClockDomain, DomainId, SimTime, SyncConfig};

/// A unit of data carried over a channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Token {
    pub seq: u64,
    pub payload_cycles: Option<u32>,
    pub tag: Option<u64>,
}

impl Token {
    pub fn new(seq: u64) -> Self {
        Token {
            seq,
            payload_cycles: None,
            tag: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Writer,
    Reader,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FifoError {
    #[error("{side:?} access at {time} is not on a rising edge of domain {domain}")]
    MisalignedEdge {
        side: Side,
        time: SimTime,
        domain: DomainId,
    },
    #[error("capacity must be at least 1")]
    ZeroCapacity,
    #[error("{initial} initial tokens exceed capacity {capacity}")]
    InitialOverflow { initial: u32, capacity: u32 },
    #[error("no reserved slot is awaiting delivery")]
    NothingToDeliver,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PushOutcome {
    Accepted,
    Stalled,
}

#[derive(Clone, Copy, Debug)]
struct WriteEvent {
    /// When the writer advanced its own pointer.
    committed: SimTime,
    /// When the data landed in the buffer; the reader syncs from here.
    /// `None` while a reserved slot is still in transit.
    landed: Option<SimTime>,
    count: u64,
}

#[derive(Clone, Copy, Debug)]
struct ReadEvent {
    time: SimTime,
    count: u64,
}

/// Clock domains on either side of a FIFO, borrowed for a single access.
#[derive(Clone, Copy)]
pub struct Ends<'a> {
    pub write: &'a ClockDomain,
    pub read: &'a ClockDomain,
}

/// Bounded FIFO between two clock domains.
#[derive(Clone, Debug)]
pub struct DualClockFifo {
    capacity: u32,
    queue: VecDeque<Token>,
    writes: VecDeque<WriteEvent>,
    reads: VecDeque<ReadEvent>,
    /// Write count of the newest compacted write event (visible everywhere).
    base_writes: u64,
    /// Read count of the newest compacted read event.
    base_reads: u64,
    write_domain: DomainId,
    read_domain: DomainId,
    /// Synchronizer carrying the write pointer into the read domain.
    to_reader: SyncConfig,
    /// Synchronizer carrying the read pointer into the write domain.
    to_writer: SyncConfig,
    next_seq: u64,
}

impl DualClockFifo {
    pub fn new(
        capacity: u32,
        write_domain: DomainId,
        read_domain: DomainId,
        to_reader: SyncConfig,
        to_writer: SyncConfig,
    ) -> Result<Self, FifoError> {
        Self::with_initial(capacity, 0, write_domain, read_domain, to_reader, to_writer)
    }

    /// A FIFO pre-loaded with `initial` tokens, visible to both sides at time zero.
    pub fn with_initial(
        capacity: u32,
        initial: u32,
        write_domain: DomainId,
        read_domain: DomainId,
        to_reader: SyncConfig,
        to_writer: SyncConfig,
    ) -> Result<Self, FifoError> {
        if capacity == 0 {
            return Err(FifoError::ZeroCapacity);
        }
        if initial > capacity {
            return Err(FifoError::InitialOverflow { initial, capacity });
        }
        Ok(DualClockFifo {
            capacity,
            queue: (0..u64::from(initial)).map(Token::new).collect(),
            writes: VecDeque::new(),
            reads: VecDeque::new(),
            base_writes: u64::from(initial),
            base_reads: 0,
            write_domain,
            read_domain,
            to_reader,
            to_writer,
            next_seq: u64::from(initial),
        })
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn write_domain(&self) -> DomainId {
        self.write_domain
    }

    pub fn read_domain(&self) -> DomainId {
        self.read_domain
    }

    /// Total pointer advances on the writer side, including initial tokens.
    pub fn total_writes(&self) -> u64 {
        self.writes.back().map_or(self.base_writes, |e| e.count)
    }

    pub fn total_reads(&self) -> u64 {
        self.reads.back().map_or(self.base_reads, |e| e.count)
    }

    /// Tokens currently buffered (landed and not yet popped).
    pub fn buffered(&self) -> usize {
        self.queue.len()
    }

    /// Reserved slots whose data has not landed yet.
    pub fn in_transit(&self) -> usize {
        self.writes.iter().filter(|e| e.landed.is_none()).count()
    }

    fn reader_sees(&self, landed: Option<SimTime>, t: SimTime, read: &ClockDomain) -> bool {
        landed.is_some_and(|l| sync_observe(l, read, self.to_reader) <= t)
    }

    fn writes_committed_by(&self, t: SimTime) -> u64 {
        let n = self.writes.partition_point(|e| e.committed <= t);
        if n == 0 {
            self.base_writes
        } else {
            self.writes[n - 1].count
        }
    }

    fn writes_seen_by_reader(&self, t: SimTime, read: &ClockDomain) -> u64 {
        let n = self.writes.partition_point(|e| self.reader_sees(e.landed, t, read));
        if n == 0 {
            self.base_writes
        } else {
            self.writes[n - 1].count
        }
    }

    fn reads_by(&self, t: SimTime) -> u64 {
        let n = self.reads.partition_point(|e| e.time <= t);
        if n == 0 {
            self.base_reads
        } else {
            self.reads[n - 1].count
        }
    }

    fn reads_seen_by_writer(&self, t: SimTime, write: &ClockDomain) -> u64 {
        let n = self
            .reads
            .partition_point(|e| sync_observe(e.time, write, self.to_writer) <= t);
        if n == 0 {
            self.base_reads
        } else {
            self.reads[n - 1].count
        }
    }

    /// Occupancy as one side perceives it at `t`: its own pointer is current,
    /// the other side's is whatever has been synchronized by `t`.
    pub fn observed_occupancy(&self, side: Side, t: SimTime, ends: Ends<'_>) -> u64 {
        match side {
            Side::Writer => self
                .writes_committed_by(t)
                .saturating_sub(self.reads_seen_by_writer(t, ends.write)),
            Side::Reader => self
                .writes_seen_by_reader(t, ends.read)
                .saturating_sub(self.reads_by(t)),
        }
    }

    /// Pushes committed by `t` minus pops by `t`.
    pub fn true_occupancy(&self, t: SimTime) -> u64 {
        self.writes_committed_by(t) - self.reads_by(t)
    }

    fn check_edge(&self, side: Side, t: SimTime, dom: &ClockDomain) -> Result<(), FifoError> {
        if dom.is_edge(t) {
            Ok(())
        } else {
            Err(FifoError::MisalignedEdge {
                side,
                time: t,
                domain: dom.id(),
            })
        }
    }

    /// Writes `tok` at write-domain edge `t` if the writer's view has room.
    /// The token's `seq` is assigned by the FIFO.
    pub fn try_push(&mut self, tok: Token, t: SimTime, ends: Ends<'_>) -> Result<PushOutcome, FifoError> {
        if !self.try_reserve(t, ends)? {
            return Ok(PushOutcome::Stalled);
        }
        self.deliver(tok, t)?;
        Ok(PushOutcome::Accepted)
    }

    /// Claims a slot at write-domain edge `t` without landing data yet; the
    /// matching [`deliver`](Self::deliver) call lands it. Used when a token
    /// travels through an interconnect before reaching the buffer.
    pub fn try_reserve(&mut self, t: SimTime, ends: Ends<'_>) -> Result<bool, FifoError> {
        self.check_edge(Side::Writer, t, ends.write)?;
        if self.observed_occupancy(Side::Writer, t, ends) >= u64::from(self.capacity) {
            return Ok(false);
        }
        let count = self.total_writes() + 1;
        self.writes.push_back(WriteEvent {
            committed: t,
            landed: None,
            count,
        });
        Ok(true)
    }

    /// Lands the oldest reserved slot at time `t` and returns the sequence
    /// number given to the token.
    pub fn deliver(&mut self, mut tok: Token, t: SimTime) -> Result<u64, FifoError> {
        let ev = self
            .writes
            .iter_mut()
            .find(|e| e.landed.is_none())
            .ok_or(FifoError::NothingToDeliver)?;
        ev.landed = Some(t.max(ev.committed));
        tok.seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push_back(tok);
        Ok(tok.seq)
    }

    /// Pops the head token at read-domain edge `t` if the reader can see one.
    pub fn try_pop(&mut self, t: SimTime, ends: Ends<'_>) -> Result<Option<Token>, FifoError> {
        self.check_edge(Side::Reader, t, ends.read)?;
        if self.observed_occupancy(Side::Reader, t, ends) == 0 {
            return Ok(None);
        }
        let tok = self
            .queue
            .pop_front()
            .expect("reader-visible tokens have landed in the buffer");
        let count = self.total_reads() + 1;
        self.reads.push_back(ReadEvent { time: t, count });
        Ok(Some(tok))
    }

    /// Folds history that both sides have already synchronized by `horizon`.
    /// Queries at times `>= horizon` are unaffected.
    pub fn compact(&mut self, horizon: SimTime, ends: Ends<'_>) {
        while let Some(front) = self.writes.front() {
            if front.committed <= horizon && self.reader_sees(front.landed, horizon, ends.read) {
                self.base_writes = front.count;
                self.writes.pop_front();
            } else {
                break;
            }
        }
        while let Some(front) = self.reads.front() {
            if sync_observe(front.time, ends.write, self.to_writer) <= horizon {
                self.base_reads = front.count;
                self.reads.pop_front();
            } else {
                break;
            }
        }
    }

    /// Number of history entries still held.
    pub fn history_len(&self) -> usize {
        self.writes.len() + self.reads.len()
    }
}
