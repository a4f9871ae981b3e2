// Copyright 2026 The ribvf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use tungstenite::{Message, WebSocket};

use super::protocol::{ClientMessage, MeshPayload, ServerMessage, PROTOCOL_VERSION};
use super::{HarnessError, Session, SessionFrame};
use crate::sim::{spawn_follower, Follower, FollowerCommand, FollowerFrame, FollowerHandle, LeaderSample, Latest};

/// Poll interval of client sockets and of the accept loop.
const POLL: Duration = Duration::from_millis(2);

struct Shared {
    session: Arc<Session>,
    leader: Arc<Latest<LeaderSample>>,
    frames: Arc<Latest<FollowerFrame>>,
    commands: Mutex<Sender<FollowerCommand>>,
    /// Client id of the driver, 0 when nobody drives.
    driver: AtomicU64,
    stop: AtomicBool,
    scene_init: String,
}

/// Running session endpoint.
pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    accept: Option<JoinHandle<()>>,
    follower: Option<FollowerHandle>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting, closes every connection and stops the follower.
    pub fn shutdown(mut self) -> Result<(), HarnessError> {
        self.halt()
    }

    fn halt(&mut self) -> Result<(), HarnessError> {
        self.shared.stop.store(true, Ordering::SeqCst);
        if let Some(j) = self.accept.take() {
            let _ = j.join();
        }
        match self.follower.take() {
            Some(f) => f.stop().map(|_| ()).map_err(HarnessError::from),
            None => Ok(()),
        }
    }

    /// Blocks until the follower loop ends (it only ends on a fault).
    pub fn wait(mut self) -> Result<(), HarnessError> {
        while !self.follower.as_ref().map_or(true, FollowerHandle::is_finished) {
            std::thread::sleep(Duration::from_millis(50));
        }
        self.halt()
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.halt();
    }
}

/// Serves `session` on `addr` (port 0 picks a free port).
///
/// The follower runs in real time on its own thread. Each connection gets
/// a `scene_init` message, then `state_frame` messages at the configured
/// frame rate with the newest frame. The first client to send a control
/// message becomes the driver until it disconnects; control messages from
/// other clients are answered with an error frame.
pub fn serve(session: Arc<Session>, addr: impl ToSocketAddrs) -> Result<ServerHandle, HarnessError> {
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    let leader = Arc::new(Latest::new());
    let frames = Arc::new(Latest::new());
    let (tx, rx) = mpsc::channel();
    let follower = Follower::new(session.scene.clone(), session.config.follower, session.start)?;
    let follower = spawn_follower(follower, leader.clone(), frames.clone(), rx, true);
    let scene_init = ServerMessage::SceneInit {
        protocol_version: PROTOCOL_VERSION,
        skin: MeshPayload::new("skin", &session.body.skin),
        fixtures: session.fixtures.tubes.iter().map(|t| MeshPayload::new(t.id.to_string(), &t.mesh)).collect(),
        config: Box::new(session.config.clone()),
        start: session.start,
    }
    .to_json();
    let shared = Arc::new(Shared {
        session,
        leader,
        frames,
        commands: Mutex::new(tx),
        driver: AtomicU64::new(0),
        stop: AtomicBool::new(false),
        scene_init,
    });
    let s = shared.clone();
    let accept = std::thread::spawn(move || {
        let next_id = AtomicU64::new(1);
        let mut clients = Vec::new();
        while !s.stop.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, _)) => {
                    let id = next_id.fetch_add(1, Ordering::SeqCst);
                    let s = s.clone();
                    clients.push(std::thread::spawn(move || {
                        let _ = client(&s, stream, id);
                        // a departing driver frees the slot; the follower
                        // holds once its samples stop
                        let _ = s.driver.compare_exchange(id, 0, Ordering::SeqCst, Ordering::SeqCst);
                    }));
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(POLL),
                Err(_) => std::thread::sleep(POLL),
            }
            clients.retain(|c: &JoinHandle<()>| !c.is_finished());
        }
        for c in clients {
            let _ = c.join();
        }
    });
    Ok(ServerHandle { addr: local, shared, accept: Some(accept), follower: Some(follower) })
}

fn client(s: &Shared, stream: TcpStream, id: u64) -> Result<(), tungstenite::Error> {
    stream.set_nonblocking(false)?;
    let mut ws: WebSocket<TcpStream> = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => e,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::ConnectionClosed,
    })?;
    ws.send(Message::text(s.scene_init.clone()))?;
    ws.get_ref().set_read_timeout(Some(POLL))?;
    let interval = Duration::from_secs_f64(1.0 / s.session.config.frame_rate);
    let mut next_frame = Instant::now();
    let mut seen = 0;
    while !s.stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(text)) => {
                if let Err(e) = handle(s, id, text.as_str()) {
                    ws.send(Message::text(ServerMessage::error(e).to_json()))?;
                }
            }
            Ok(Message::Binary(_)) => ws.send(Message::text(ServerMessage::error("binary messages are not supported").to_json()))?,
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(e) => return Err(e),
        }
        if Instant::now() >= next_frame {
            next_frame += interval;
            if let Some((seq, f)) = s.frames.newer_than(seen) {
                seen = seq;
                let msg = ServerMessage::StateFrame { protocol_version: PROTOCOL_VERSION, frame: SessionFrame::from_follower(&f) };
                ws.send(Message::text(msg.to_json()))?;
            }
        }
    }
    let _ = ws.close(None);
    let _ = ws.flush();
    Ok(())
}

fn handle(s: &Shared, id: u64, text: &str) -> Result<(), String> {
    let msg = ClientMessage::parse(text)?;
    let driver = match s.driver.compare_exchange(0, id, Ordering::SeqCst, Ordering::SeqCst) {
        Ok(_) => id,
        Err(current) => current,
    };
    if driver != id {
        return Err("read-only client: another client is driving".into());
    }
    let send = |cmd| s.commands.lock().expect("command channel poisoned").send(cmd).map_err(|_| "session stopped".to_string());
    match msg {
        ClientMessage::ReferenceUpdate { position, .. } => {
            s.leader.publish(LeaderSample { position });
        }
        ClientMessage::ModeSet { vf_enabled, reset, .. } => {
            if let Some(on) = vf_enabled {
                send(FollowerCommand::SetVf(on))?;
            }
            if reset {
                send(FollowerCommand::Reset(s.session.start))?;
            }
        }
    }
    Ok(())
}
