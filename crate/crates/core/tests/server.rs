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


//! Live session endpoint driven by WebSocket clients.

use std::net::TcpStream;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use ribvf::harness::protocol::{ClientMessage, ServerMessage, PROTOCOL_VERSION};
use ribvf::harness::{serve, ServerHandle, Session, SessionConfig, SessionFrame};
use ribvf::Vec3;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

type Client = WebSocket<MaybeTlsStream<TcpStream>>;

fn session() -> Arc<Session> {
    static S: OnceLock<Arc<Session>> = OnceLock::new();
    S.get_or_init(|| Arc::new(Session::build(SessionConfig::default()).unwrap())).clone()
}

fn start() -> (Arc<Session>, ServerHandle) {
    let s = session();
    let server = serve(s.clone(), "127.0.0.1:0").unwrap();
    (s, server)
}

fn connect(server: &ServerHandle) -> Client {
    let (ws, _) = tungstenite::connect(format!("ws://{}", server.local_addr())).unwrap();
    if let MaybeTlsStream::Plain(tcp) = ws.get_ref() {
        tcp.set_read_timeout(Some(Duration::from_millis(20))).unwrap();
    }
    ws
}

/// Next server message, or `None` if nothing arrived within the read timeout.
fn receive(ws: &mut Client) -> Option<ServerMessage> {
    match ws.read() {
        Ok(Message::Text(t)) => Some(serde_json::from_str(t.as_str()).unwrap()),
        Ok(_) => None,
        Err(tungstenite::Error::Io(e))
            if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) =>
        {
            None
        }
        Err(e) => panic!("{e}"),
    }
}

fn send(ws: &mut Client, msg: &ClientMessage) {
    ws.send(Message::text(msg.to_json())).unwrap();
}

fn reference(position: Vec3) -> ClientMessage {
    ClientMessage::ReferenceUpdate { protocol_version: PROTOCOL_VERSION, position }
}

/// Reads until a state frame satisfies `pred`, calling `tick` between reads.
fn wait_for_frame(
    ws: &mut Client,
    timeout: Duration,
    mut tick: impl FnMut(&mut Client),
    pred: impl Fn(&SessionFrame) -> bool,
) -> Option<SessionFrame> {
    let end = Instant::now() + timeout;
    while Instant::now() < end {
        tick(ws);
        if let Some(ServerMessage::StateFrame { frame, .. }) = receive(ws) {
            if pred(&frame) {
                return Some(frame);
            }
        }
    }
    None
}

fn wait_for_error(ws: &mut Client, timeout: Duration) -> Option<String> {
    let end = Instant::now() + timeout;
    while Instant::now() < end {
        if let Some(ServerMessage::Error { message, protocol_version }) = receive(ws) {
            assert_eq!(protocol_version, PROTOCOL_VERSION);
            return Some(message);
        }
    }
    None
}

#[test]
fn scene_init_comes_first_then_frames_stream() {
    let (s, server) = start();
    let mut ws = connect(&server);
    let first = loop {
        if let Some(m) = receive(&mut ws) {
            break m;
        }
    };
    let ServerMessage::SceneInit { protocol_version, skin, fixtures, config, start } = first else {
        panic!("first message was {first:?}");
    };
    assert_eq!(protocol_version, PROTOCOL_VERSION);
    assert_eq!(skin.faces.len(), s.body.skin.face_count());
    assert_eq!(fixtures.len(), 12);
    assert!(fixtures.iter().any(|f| f.name == "rib_left_3"));
    assert_eq!(*config, s.config);
    assert_eq!(start, s.start);
    let f = wait_for_frame(&mut ws, Duration::from_secs(2), |_| {}, |_| true).unwrap();
    assert!(f.vf_enabled);
    server.shutdown().unwrap();
}

#[test]
fn reference_inside_a_tube_is_clamped_to_the_offset_surface() {
    let (s, server) = start();
    let mut ws = connect(&server);
    let rib = s.fixtures.curves.iter().find(|c| c.id.to_string() == "rib_left_3").unwrap();
    let inside = rib.central.eval(0.85);
    let r = s.config.follower.filter.probe_radius;
    let mut last_sent = Instant::now() - Duration::from_secs(1);
    let clamped = wait_for_frame(
        &mut ws,
        Duration::from_secs(5),
        |ws| {
            if last_sent.elapsed() >= Duration::from_millis(10) {
                send(ws, &reference(inside));
                last_sent = Instant::now();
            }
        },
        |f| f.clamped,
    )
    .expect("no clamped frame");
    let d = s.scene.fixture.distance(&clamped.filtered, 1.0).unwrap();
    assert!((d - r).abs() <= 2e-3, "filtered point {d} m from the tubes");
    assert!(clamped.active_constraints > 0);
    server.shutdown().unwrap();
}

#[test]
fn second_client_cannot_drive() {
    let (s, server) = start();
    let mut driver = connect(&server);
    let mut viewer = connect(&server);
    send(&mut driver, &reference(s.start));
    assert!(wait_for_error(&mut driver, Duration::from_millis(300)).is_none());
    send(&mut viewer, &reference(s.start + Vec3::new(0.0, 0.0, 0.01)));
    let msg = wait_for_error(&mut viewer, Duration::from_secs(2)).expect("viewer was allowed to drive");
    assert!(msg.contains("driving"), "{msg}");
    // the viewer still receives frames
    assert!(wait_for_frame(&mut viewer, Duration::from_secs(2), |_| {}, |_| true).is_some());
    server.shutdown().unwrap();
}

#[test]
fn malformed_messages_get_an_error_and_the_session_continues() {
    let (s, server) = start();
    let mut ws = connect(&server);
    for bad in [
        "not json",
        r#"{"type":"reference_update","position":[0,0,0]}"#,
        r#"{"type":"reference_update","protocol_version":99,"position":[0,0,0]}"#,
        r#"{"type":"teleport","protocol_version":1}"#,
    ] {
        ws.send(Message::text(bad)).unwrap();
        assert!(wait_for_error(&mut ws, Duration::from_secs(2)).is_some(), "{bad}");
    }
    let target = s.start + Vec3::new(0.0, 0.0, 0.01);
    let mut n = 0;
    let moved = wait_for_frame(
        &mut ws,
        Duration::from_secs(3),
        |ws| {
            n += 1;
            if n % 2 == 0 {
                send(ws, &reference(target));
            }
        },
        |f| (f.filtered - target).norm() < 1e-9,
    );
    assert!(moved.is_some());
    server.shutdown().unwrap();
}

#[test]
fn driver_disconnect_leads_to_hold() {
    let (s, server) = start();
    let mut driver = connect(&server);
    let mut viewer = connect(&server);
    let target = s.start + Vec3::new(0.0, 0.01, 0.0);
    wait_for_frame(
        &mut driver,
        Duration::from_secs(3),
        |ws| send(ws, &reference(target)),
        |f| !f.hold && (f.filtered - target).norm() < 1e-9,
    )
    .expect("driver never took control");
    drop(driver);
    let gone = Instant::now();
    let held = wait_for_frame(&mut viewer, Duration::from_secs(2), |_| {}, |f| f.hold).expect("never held");
    // starvation timeout plus a few frame periods of slack on a loaded machine
    assert!(gone.elapsed() < Duration::from_millis(400), "{:?}", gone.elapsed());
    assert_eq!(held.filtered, target);
    // the slot is free again: the viewer may now drive
    send(&mut viewer, &reference(s.start));
    assert!(wait_for_error(&mut viewer, Duration::from_millis(300)).is_none());
    server.shutdown().unwrap();
}
