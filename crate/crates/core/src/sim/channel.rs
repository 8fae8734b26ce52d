//! Behavioral model of a self-timed handshake FIFO link.
//!
//! A word taken at time `t` is in flight until `t + tf`, then sits in the
//! receiver-side buffer. Popping it returns its slot to the sender at
//! `now + tb`. The sender may only send while it holds a credit, so
//! `in_flight + buffered + returning credits <= capacity`.

use std::collections::VecDeque;

/// Who sits at either end of a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Nale(usize),
    Router(usize),
    Host(usize),
}

impl Endpoint {
    /// Tile used to order events that concern this endpoint.
    pub fn tile(self) -> usize {
        match self {
            Endpoint::Nale(n) | Endpoint::Router(n) | Endpoint::Host(n) => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelClass {
    Mesh,
    Net,
    Inject,
    Eject,
    HostIn,
    HostOut,
}

impl ChannelClass {
    pub fn name(self) -> &'static str {
        match self {
            ChannelClass::Mesh => "mesh",
            ChannelClass::Net => "net",
            ChannelClass::Inject => "inject",
            ChannelClass::Eject => "eject",
            ChannelClass::HostIn => "host_in",
            ChannelClass::HostOut => "host_out",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Channel {
    pub class: ChannelClass,
    pub from: Endpoint,
    pub to: Endpoint,
    /// `None` for an unbounded queue.
    pub capacity: Option<usize>,
    pub latency: u64,
    pub credit_latency: u64,
    credits: usize,
    in_flight: VecDeque<(u64, i32)>,
    buffer: VecDeque<i32>,
    returning: usize,
    pub sent: u64,
    pub received: u64,
    pub high_water: usize,
}

impl Channel {
    pub fn new(
        class: ChannelClass,
        from: Endpoint,
        to: Endpoint,
        capacity: Option<usize>,
        latency: u64,
        credit_latency: u64,
    ) -> Self {
        Channel {
            class,
            from,
            to,
            capacity,
            latency,
            credit_latency,
            credits: capacity.unwrap_or(0),
            in_flight: VecDeque::new(),
            buffer: VecDeque::new(),
            returning: 0,
            sent: 0,
            received: 0,
            high_water: 0,
        }
    }

    pub fn credits(&self) -> usize {
        match self.capacity {
            Some(_) => self.credits,
            None => usize::MAX,
        }
    }

    pub fn can_send(&self, words: usize) -> bool {
        self.credits() >= words
    }

    /// Takes a word at `t`; returns its arrival time.
    pub fn send(&mut self, t: u64, word: i32) -> u64 {
        if self.capacity.is_some() {
            assert!(self.credits > 0, "send without credit");
            self.credits -= 1;
        }
        let arrive = t + self.latency;
        debug_assert!(self.in_flight.back().is_none_or(|&(a, _)| a <= arrive));
        self.in_flight.push_back((arrive, word));
        self.sent += 1;
        self.high_water = self.high_water.max(self.occupancy());
        arrive
    }

    /// Lands the oldest in-flight word.
    pub fn arrive(&mut self, now: u64) {
        let (at, w) = self.in_flight.pop_front().expect("arrival event without word in flight");
        debug_assert_eq!(at, now);
        self.buffer.push_back(w);
    }

    pub fn ready(&self) -> usize {
        self.buffer.len()
    }

    pub fn peek(&self, i: usize) -> Option<i32> {
        self.buffer.get(i).copied()
    }

    /// Pops a buffered word. Returns whether a credit is now on its way back.
    pub fn pop(&mut self) -> Option<(i32, bool)> {
        let w = self.buffer.pop_front()?;
        self.received += 1;
        let bounded = self.capacity.is_some();
        if bounded {
            self.returning += 1;
        }
        Some((w, bounded))
    }

    pub fn credit(&mut self) {
        debug_assert!(self.returning > 0);
        self.returning -= 1;
        self.credits += 1;
    }

    /// Words in flight or buffered.
    pub fn occupancy(&self) -> usize {
        self.in_flight.len() + self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancy() == 0
    }

    /// Occupancy, conservation and FIFO-order checks.
    pub fn check(&self) -> Result<(), String> {
        if let Some(cap) = self.capacity {
            if self.occupancy() + self.returning + self.credits != cap {
                return Err(format!(
                    "slots do not add up: {} occupied + {} returning + {} credits != {cap}",
                    self.occupancy(),
                    self.returning,
                    self.credits
                ));
            }
            if self.occupancy() > cap {
                return Err(format!("occupancy {} exceeds capacity {cap}", self.occupancy()));
            }
        }
        if self.sent != self.received + self.occupancy() as u64 {
            return Err(format!(
                "conservation: sent {} != received {} + held {}",
                self.sent,
                self.received,
                self.occupancy()
            ));
        }
        if self.in_flight.iter().zip(self.in_flight.iter().skip(1)).any(|(a, b)| a.0 > b.0) {
            return Err("in-flight words out of order".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(cap: usize) -> Channel {
        Channel::new(ChannelClass::Mesh, Endpoint::Nale(0), Endpoint::Nale(1), Some(cap), 2, 1)
    }

    #[test]
    fn words_arrive_after_tf_in_order() {
        let mut c = ch(4);
        assert_eq!(c.send(10, 7), 12);
        assert_eq!(c.send(11, 8), 13);
        c.arrive(12);
        c.arrive(13);
        assert_eq!(c.pop(), Some((7, true)));
        assert_eq!(c.pop(), Some((8, true)));
        c.check().unwrap();
    }

    #[test]
    fn credits_limit_sends() {
        let mut c = ch(2);
        c.send(0, 1);
        c.send(0, 2);
        assert!(!c.can_send(1));
        c.arrive(2);
        c.pop();
        assert!(!c.can_send(1), "credit still returning");
        c.credit();
        assert!(c.can_send(1));
        c.check().unwrap();
    }

    #[test]
    fn unbounded_never_blocks() {
        let mut c = Channel::new(ChannelClass::Eject, Endpoint::Router(0), Endpoint::Nale(0), None, 1, 1);
        for i in 0..100 {
            c.send(i, i as i32);
        }
        assert!(c.can_send(1000));
        assert_eq!(c.high_water, 100);
        c.check().unwrap();
    }
}
