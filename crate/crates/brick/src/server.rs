use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, UdpSocket};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use brickstore_core::Rgid;
use brickstore_wire::{read_frame, Beacon, CtlOutcome, Frame, Message, Status};
use crossbeam_channel::{bounded, Receiver, Sender, TrySendError};
use log::{debug, info, warn};

use crate::config::BrickConfig;
use crate::core::{BrickCore, BrickError};
use crate::queue::{classify, QueueKind};

/// Datagram that asks a brick to add the sender to its beacon subscribers
/// and reply with an immediate beacon.
pub const BEACON_SOLICIT: &[u8; 4] = b"BCN?";

/// How long a solicited subscriber stays on the beacon list without
/// re-soliciting, in beacon periods.
const SUBSCRIBER_TTL_PERIODS: u32 = 10;

const IDLE_POLL: Duration = Duration::from_millis(100);

/// Hook for control-channel commands that need policy or process control
/// (restarts). Announce/withdraw are handled by the server itself.
pub trait ControlHandler: Send + Sync {
    fn handle(&self, msg: &Message, from: SocketAddr) -> Message;
}

/// Control handler that refuses everything; useful for bare test bricks.
pub struct NoControl;

impl ControlHandler for NoControl {
    fn handle(&self, _msg: &Message, _from: SocketAddr) -> Message {
        Message::CtlAck {
            outcome: CtlOutcome::Failed,
        }
    }
}

struct Job {
    frame: Frame,
    reply: mpsc::Sender<Frame>,
}

/// A running brick: TCP data/control plane, per-kind worker pools, UDP
/// beaconing. `stop()` tears down every thread; restart-as-recovery is the
/// caller dropping the whole server (and its `BrickCore`) and starting a
/// fresh one over the same store file.
pub struct BrickServer {
    cfg: BrickConfig,
    core: Arc<BrickCore>,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
    senders: Option<[Sender<Job>; 3]>,
    local_addr: SocketAddr,
}

pub fn rgid_sidecar_path(store_path: &Path) -> PathBuf {
    let mut os = store_path.as_os_str().to_owned();
    os.push(".rgids");
    PathBuf::from(os)
}

/// Persist the announced rgid set next to the store so a restarted brick
/// keeps announcing groups it acquired through a split.
pub fn persist_rgids(store_path: &Path, rgids: &[Rgid]) {
    let lines: Vec<String> = rgids.iter().map(|r| r.to_string()).collect();
    if let Err(e) = std::fs::write(rgid_sidecar_path(store_path), lines.join("\n")) {
        warn!("failed to persist rgid sidecar: {e}");
    }
}

pub fn load_rgid_sidecar(store_path: &Path) -> Option<Vec<Rgid>> {
    let text = std::fs::read_to_string(rgid_sidecar_path(store_path)).ok()?;
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        out.push(line.parse().ok()?);
    }
    Some(out)
}

impl BrickServer {
    pub fn start(
        cfg: BrickConfig,
        core: Arc<BrickCore>,
        ctrl: Arc<dyn ControlHandler>,
    ) -> std::io::Result<BrickServer> {
        let stop = Arc::new(AtomicBool::new(false));
        let mut threads = Vec::new();

        let listener = TcpListener::bind(cfg.endpoint.socket_addr())?;
        listener.set_nonblocking(true)?;
        let local_addr = listener.local_addr()?;
        info!("brick {} listening", cfg.endpoint);

        // Worker pools, one bounded queue per request kind.
        let mut senders_vec = Vec::new();
        for kind in QueueKind::ALL {
            let (tx, rx): (Sender<Job>, Receiver<Job>) =
                bounded(cfg.queue_capacities.get(kind).max(1));
            for w in 0..cfg.worker_counts.get(kind).max(1) {
                let rx = rx.clone();
                let core = core.clone();
                threads.push(
                    thread::Builder::new()
                        .name(format!("worker-{kind:?}-{w}"))
                        .spawn(move || worker_loop(rx, core))
                        .unwrap(),
                );
            }
            senders_vec.push(tx);
        }
        let senders: [Sender<Job>; 3] = senders_vec.try_into().map_err(|_| ()).unwrap();

        // Accept loop.
        {
            let stop = stop.clone();
            let senders = senders.clone();
            let core = core.clone();
            let ctrl = ctrl.clone();
            let cfg2 = cfg.clone();
            threads.push(
                thread::Builder::new()
                    .name("accept".into())
                    .spawn(move || {
                        accept_loop(listener, stop, senders, core, ctrl, cfg2);
                    })
                    .unwrap(),
            );
        }

        // Beaconing plus solicitation handling over UDP.
        {
            let stop = stop.clone();
            let core = core.clone();
            let cfg2 = cfg.clone();
            threads.push(
                thread::Builder::new()
                    .name("beacon".into())
                    .spawn(move || beacon_loop(cfg2, core, stop))
                    .unwrap(),
            );
        }

        Ok(BrickServer {
            cfg,
            core,
            stop,
            threads,
            senders: Some(senders),
            local_addr,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn core(&self) -> &Arc<BrickCore> {
        &self.core
    }

    pub fn config(&self) -> &BrickConfig {
        &self.cfg
    }

    /// Stop every thread and drop the queues. Returns once all workers have
    /// exited.
    pub fn stop(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        self.senders = None; // workers drain and exit
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for BrickServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        self.senders = None;
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

fn accept_loop(
    listener: TcpListener,
    stop: Arc<AtomicBool>,
    senders: [Sender<Job>; 3],
    core: Arc<BrickCore>,
    ctrl: Arc<dyn ControlHandler>,
    cfg: BrickConfig,
) {
    let mut conn_threads: Vec<JoinHandle<()>> = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                debug!("connection from {peer}");
                let stop = stop.clone();
                let senders = senders.clone();
                let core = core.clone();
                let ctrl = ctrl.clone();
                let cfg = cfg.clone();
                conn_threads.push(
                    thread::Builder::new()
                        .name(format!("conn-{peer}"))
                        .spawn(move || connection_loop(stream, peer, stop, senders, core, ctrl, cfg))
                        .unwrap(),
                );
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                thread::sleep(IDLE_POLL);
            }
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(IDLE_POLL);
            }
        }
        conn_threads.retain(|t| !t.is_finished());
    }
    for t in conn_threads {
        let _ = t.join();
    }
}

fn connection_loop(
    stream: TcpStream,
    peer: SocketAddr,
    stop: Arc<AtomicBool>,
    senders: [Sender<Job>; 3],
    core: Arc<BrickCore>,
    ctrl: Arc<dyn ControlHandler>,
    cfg: BrickConfig,
) {
    stream.set_read_timeout(Some(IDLE_POLL)).ok();
    stream.set_nodelay(true).ok();
    let write_half = match stream.try_clone() {
        Ok(s) => s,
        Err(e) => {
            warn!("clone failed for {peer}: {e}");
            return;
        }
    };

    // Writer thread: replies from any worker are serialized here.
    let (reply_tx, reply_rx) = mpsc::channel::<Frame>();
    let writer = thread::Builder::new()
        .name(format!("write-{peer}"))
        .spawn(move || {
            let mut w = BufWriter::new(write_half);
            while let Ok(frame) = reply_rx.recv() {
                if brickstore_wire::write_frame(&mut w, &frame).is_err() {
                    break;
                }
                if w.flush().is_err() {
                    break;
                }
            }
        })
        .unwrap();

    let mut r = BufReader::new(stream);
    while !stop.load(Ordering::SeqCst) {
        let frame = match read_frame(&mut r) {
            Ok(f) => f,
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                continue;
            }
            Err(e) => {
                if e.kind() != std::io::ErrorKind::UnexpectedEof {
                    debug!("connection {peer} closed: {e}");
                }
                break;
            }
        };
        let request_id = frame.request_id;
        match &frame.msg {
            Message::AnnounceRgids { rgids } => {
                core.announce(rgids);
                persist_rgids(&cfg.store_path, &core.announced());
                let _ = reply_tx.send(Frame {
                    request_id,
                    msg: Message::CtlAck {
                        outcome: CtlOutcome::Executed,
                    },
                });
            }
            Message::WithdrawRgids { rgids } => {
                core.withdraw(rgids);
                persist_rgids(&cfg.store_path, &core.announced());
                let _ = reply_tx.send(Frame {
                    request_id,
                    msg: Message::CtlAck {
                        outcome: CtlOutcome::Executed,
                    },
                });
            }
            Message::RestartBrick { .. } => {
                let msg = ctrl.handle(&frame.msg, peer);
                let _ = reply_tx.send(Frame { request_id, msg });
            }
            m => match classify(m) {
                Some(kind) => {
                    let job = Job {
                        frame,
                        reply: reply_tx.clone(),
                    };
                    let idx = match kind {
                        QueueKind::Read => 0,
                        QueueKind::Put => 1,
                        QueueKind::Ts => 2,
                    };
                    match senders[idx].try_send(job) {
                        Ok(()) => {}
                        Err(TrySendError::Full(job)) => {
                            // Admission control: reject immediately.
                            let _ = job.reply.send(Frame {
                                request_id,
                                msg: Message::WriteReply {
                                    status: Status::Busy,
                                },
                            });
                        }
                        Err(TrySendError::Disconnected(_)) => break,
                    }
                }
                None => {
                    debug!("ignoring unexpected message from {peer}");
                }
            },
        }
    }
    drop(reply_tx);
    let _ = writer.join();
}

fn worker_loop(rx: Receiver<Job>, core: Arc<BrickCore>) {
    while let Ok(job) = rx.recv() {
        let request_id = job.frame.request_id;
        let msg = execute(&core, &job.frame.msg);
        if let Some(msg) = msg {
            let _ = job.reply.send(Frame { request_id, msg });
        }
    }
}

/// Execute one data-plane request against the core. `None` means no reply
/// (only possible under simulated crash injection).
pub fn execute(core: &BrickCore, msg: &Message) -> Option<Message> {
    let key = match msg {
        Message::Write { key, .. } | Message::ReadVal { key } | Message::ReadTs { key } => *key,
        _ => return None,
    };
    if !core.check_authority(key) {
        return Some(Message::WriteReply {
            status: Status::WrongReplicaGroup,
        });
    }
    match msg {
        Message::Write { key, ts, value } => match core.write(*key, value, *ts) {
            Ok(outcome) => Some(Message::WriteReply {
                status: match outcome {
                    crate::core::WriteOutcome::Stored => Status::Ok,
                    crate::core::WriteOutcome::StaleIgnored => Status::StaleIgnored,
                    crate::core::WriteOutcome::TimestampError => Status::TimestampError,
                },
            }),
            Err(BrickError::RecordTooLarge { .. }) => Some(Message::WriteReply {
                status: Status::RecordTooLarge,
            }),
            Err(BrickError::Crashed(_)) => None,
            Err(_) => Some(Message::WriteReply {
                status: Status::IoError,
            }),
        },
        Message::ReadVal { key } => match core.read_val(*key) {
            Ok(rv) => Some(Message::ValReply {
                ts: rv.ts,
                value: rv.value,
            }),
            Err(_) => Some(Message::WriteReply {
                status: Status::IoError,
            }),
        },
        Message::ReadTs { key } => match core.read_ts(*key) {
            Ok(ts) => Some(Message::TsReply { ts }),
            Err(_) => Some(Message::WriteReply {
                status: Status::IoError,
            }),
        },
        _ => None,
    }
}

fn now_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

fn beacon_loop(cfg: BrickConfig, core: Arc<BrickCore>, stop: Arc<AtomicBool>) {
    let socket = match UdpSocket::bind(cfg.endpoint.socket_addr()) {
        Ok(s) => s,
        Err(e) => {
            warn!("beacon socket bind failed: {e}; beaconing disabled");
            return;
        }
    };
    socket.set_read_timeout(Some(IDLE_POLL)).ok();
    let sequence = AtomicU64::new(1);
    let subscribers: Mutex<HashMap<SocketAddr, Instant>> = Mutex::new(HashMap::new());
    let period = Duration::from_millis(cfg.beacon_period_ms.max(10));
    let ttl = period * SUBSCRIBER_TTL_PERIODS;

    let emit = |to: Option<SocketAddr>| {
        let beacon = Beacon {
            sender: cfg.endpoint,
            sequence: sequence.fetch_add(1, Ordering::Relaxed),
            rgids: core.announced(),
            sender_time_ms: now_ms(),
        };
        let bytes = beacon.encode();
        match to {
            Some(addr) => {
                let _ = socket.send_to(&bytes, addr);
            }
            None => {
                for sink in &cfg.beacon_sinks {
                    let _ = socket.send_to(&bytes, sink.socket_addr());
                }
                let now = Instant::now();
                let mut subs = subscribers.lock().unwrap();
                subs.retain(|_, expiry| *expiry > now);
                for addr in subs.keys() {
                    let _ = socket.send_to(&bytes, *addr);
                }
            }
        }
    };

    // First beacon right away: a rebooted brick is routable without waiting
    // a full period.
    emit(None);

    let mut last = Instant::now();
    let mut buf = [0u8; 64];
    while !stop.load(Ordering::SeqCst) {
        match socket.recv_from(&mut buf) {
            Ok((4, from)) if &buf[..4] == BEACON_SOLICIT => {
                subscribers
                    .lock()
                    .unwrap()
                    .insert(from, Instant::now() + ttl);
                emit(Some(from));
            }
            Ok(_) => {}
            Err(e)
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut => {}
            Err(e) => {
                debug!("beacon recv error: {e}");
            }
        }
        if last.elapsed() >= period {
            emit(None);
            last = Instant::now();
        }
    }
}
