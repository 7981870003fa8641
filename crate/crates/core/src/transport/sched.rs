//! Cooperative executor for two in-process parties.
//!
//! Parties are plain futures that return `Pending` only while waiting on a
//! queue. Every queue operation bumps a shared progress counter; a full
//! polling pass with no progress and an unfinished party is a deadlock.

use std::cell::Cell;
use std::future::Future;
use std::pin::pin;
use std::rc::Rc;
use std::task::{Context, Poll, Waker};

use crate::error::{Error, Result};

pub fn run_pair<A, B>(
    progress: &Rc<Cell<u64>>,
    a: impl Future<Output = A>,
    b: impl Future<Output = B>,
) -> Result<(A, B)> {
    let mut a = pin!(a);
    let mut b = pin!(b);
    let mut cx = Context::from_waker(Waker::noop());
    let (mut ra, mut rb) = (None, None);
    loop {
        let before = progress.get();
        if ra.is_none() {
            if let Poll::Ready(v) = a.as_mut().poll(&mut cx) {
                ra = Some(v);
            }
        }
        if rb.is_none() {
            if let Poll::Ready(v) = b.as_mut().poll(&mut cx) {
                rb = Some(v);
            }
        }
        if let (Some(_), Some(_)) = (&ra, &rb) {
            return Ok((ra.take().expect("ready"), rb.take().expect("ready")));
        }
        if progress.get() == before {
            return Err(Error::Deadlock);
        }
    }
}

/// Drives a single future whose waits never block (TCP endpoints block inside `poll`).
pub fn block_on<T>(f: impl Future<Output = T>) -> Result<T> {
    let mut f = pin!(f);
    let mut cx = Context::from_waker(Waker::noop());
    match f.as_mut().poll(&mut cx) {
        Poll::Ready(v) => Ok(v),
        Poll::Pending => Err(Error::Deadlock),
    }
}
