pub mod channel;
pub mod codec;
pub mod frame;
pub mod sched;

pub use channel::{Channel, Direction, Endpoint, Entry, Link, Transcript};
pub use frame::{Frame, FrameKind, Message};
pub use sched::{block_on, run_pair};

use std::cell::Cell;
use std::rc::Rc;

/// A connected in-process channel pair sharing one progress counter.
pub fn inproc_pair(session: [u8; 8]) -> (Channel, Channel, Rc<Link>, Rc<Cell<u64>>) {
    let progress = Rc::new(Cell::new(0));
    let link = Link::new(progress.clone());
    let c0 = Channel::new(Endpoint::InProc { link: link.clone(), me: 0 }, session);
    let c1 = Channel::new(Endpoint::InProc { link: link.clone(), me: 1 }, session);
    (c0, c1, link, progress)
}
