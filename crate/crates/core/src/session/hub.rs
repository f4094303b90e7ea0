use super::protocol::{ServerEvent, ServerFrame, WorldSnapshot};
use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::Duration;

/// Default number of events buffered per client before refreshable events
/// start being dropped.
pub const DEFAULT_CLIENT_CAPACITY: usize = 256;

struct QueueState {
    events: VecDeque<Arc<ServerFrame>>,
    closed: bool,
    dropped: u64,
}

struct ClientQueue {
    state: Mutex<QueueState>,
    ready: Condvar,
    capacity: usize,
}

impl ClientQueue {
    fn lock(&self) -> MutexGuard<'_, QueueState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Appends without ever blocking. A full queue first sheds its oldest
    /// refreshable event; metrics, acks and run results are always kept.
    fn push(&self, frame: Arc<ServerFrame>) {
        let mut q = self.lock();
        if q.events.len() >= self.capacity {
            if let Some(i) = q.events.iter().position(|f| f.event.refreshable()) {
                q.events.remove(i);
                q.dropped += 1;
            } else if frame.event.refreshable() {
                q.dropped += 1;
                return;
            }
        }
        q.events.push_back(frame);
        drop(q);
        self.ready.notify_one();
    }
}

/// Fan-out of server events to attached clients, plus the state a late
/// joiner needs to catch up.
pub struct Hub {
    inner: Mutex<HubInner>,
}

struct HubInner {
    clients: Vec<Arc<ClientQueue>>,
    snapshot: WorldSnapshot,
}

impl Hub {
    pub fn new() -> Arc<Self> {
        Arc::new(Self {
            inner: Mutex::new(HubInner {
                clients: Vec::new(),
                snapshot: WorldSnapshot::empty(),
            }),
        })
    }

    fn lock(&self) -> MutexGuard<'_, HubInner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Delivers `event` to every attached client. Never blocks on a client.
    pub fn broadcast(&self, event: ServerEvent) {
        let frame = Arc::new(ServerFrame::from(event));
        let mut inner = self.lock();
        inner.clients.retain(|c| !c.lock().closed);
        for c in &inner.clients {
            c.push(frame.clone());
        }
    }

    /// Applies `f` to the cached snapshot.
    pub fn update_snapshot(&self, f: impl FnOnce(&mut WorldSnapshot)) {
        f(&mut self.lock().snapshot);
    }

    /// Applies `f` to the cached snapshot and broadcasts the result.
    pub fn publish_snapshot(&self, f: impl FnOnce(&mut WorldSnapshot)) {
        let mut inner = self.lock();
        f(&mut inner.snapshot);
        let frame = Arc::new(ServerFrame::from(ServerEvent::WorldSnapshot(Box::new(
            inner.snapshot.clone(),
        ))));
        inner.clients.retain(|c| !c.lock().closed);
        for c in &inner.clients {
            c.push(frame.clone());
        }
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        self.lock().snapshot.clone()
    }

    /// Attaches a client. Its first event is the current snapshot, followed
    /// by everything broadcast after it joined.
    pub fn subscribe(self: &Arc<Self>, capacity: usize) -> Subscription {
        let queue = Arc::new(ClientQueue {
            state: Mutex::new(QueueState {
                events: VecDeque::new(),
                closed: false,
                dropped: 0,
            }),
            ready: Condvar::new(),
            capacity: capacity.max(1),
        });
        let mut inner = self.lock();
        queue.push(Arc::new(
            ServerEvent::WorldSnapshot(Box::new(inner.snapshot.clone())).into(),
        ));
        inner.clients.push(queue.clone());
        Subscription { queue }
    }

    pub fn client_count(&self) -> usize {
        let mut inner = self.lock();
        inner.clients.retain(|c| !c.lock().closed);
        inner.clients.len()
    }
}

/// One client's view of the broadcast stream. Dropping it detaches the
/// client.
pub struct Subscription {
    queue: Arc<ClientQueue>,
}

impl Subscription {
    pub fn try_recv(&self) -> Option<Arc<ServerFrame>> {
        self.queue.lock().events.pop_front()
    }

    /// Waits up to `timeout` for the next event.
    pub fn recv_timeout(&self, timeout: Duration) -> Option<Arc<ServerFrame>> {
        let q = self.queue.lock();
        let (mut q, _) = self
            .queue
            .ready
            .wait_timeout_while(q, timeout, |q| q.events.is_empty() && !q.closed)
            .unwrap_or_else(|e| e.into_inner());
        q.events.pop_front()
    }

    /// Events discarded because this client fell behind.
    pub fn dropped(&self) -> u64 {
        self.queue.lock().dropped
    }
}

impl Drop for Subscription {
    fn drop(&mut self) {
        self.queue.lock().closed = true;
        self.queue.ready.notify_all();
    }
}
