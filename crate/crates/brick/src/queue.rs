use brickstore_wire::Message;

/// The three data-plane queues. Differentiating request kinds keeps a
/// minimum level of service per kind and keeps long-running writes from
/// inflating read service-time variance.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum QueueKind {
    Read,
    Put,
    Ts,
}

impl QueueKind {
    pub const ALL: [QueueKind; 3] = [QueueKind::Read, QueueKind::Put, QueueKind::Ts];
}

/// Queue for a data-plane request; `None` for control-channel messages and
/// replies, which are never queued.
pub fn classify(msg: &Message) -> Option<QueueKind> {
    match msg {
        Message::ReadVal { .. } => Some(QueueKind::Read),
        Message::Write { .. } => Some(QueueKind::Put),
        Message::ReadTs { .. } => Some(QueueKind::Ts),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueueCapacities {
    pub read: usize,
    pub put: usize,
    pub ts: usize,
}

impl Default for QueueCapacities {
    fn default() -> Self {
        QueueCapacities {
            read: 256,
            put: 256,
            ts: 256,
        }
    }
}

impl QueueCapacities {
    pub fn get(&self, kind: QueueKind) -> usize {
        match kind {
            QueueKind::Read => self.read,
            QueueKind::Put => self.put,
            QueueKind::Ts => self.ts,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WorkerCounts {
    pub read: usize,
    pub put: usize,
    pub ts: usize,
}

impl Default for WorkerCounts {
    fn default() -> Self {
        WorkerCounts {
            read: 2,
            put: 2,
            ts: 2,
        }
    }
}

impl WorkerCounts {
    pub fn get(&self, kind: QueueKind) -> usize {
        match kind {
            QueueKind::Read => self.read,
            QueueKind::Put => self.put,
            QueueKind::Ts => self.ts,
        }
    }
}
