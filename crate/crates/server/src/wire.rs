//! WebSocket bridge. Clients connect with `?token=...` (or a bearer
//! Authorization header), receive JSON envelope frames for their
//! subscriptions and send either `{"op": "sub"|"unsub", "filter": ...}` or
//! command frames `{"topic": "command/...", "payload": {...}}`.

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::{RecvTimeoutError, TryRecvError};
use log::{debug, info, warn};
use serde::Deserialize;
use serde_json::json;
use tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tungstenite::http::StatusCode;
use tungstenite::protocol::frame::coding::CloseCode;
use tungstenite::protocol::CloseFrame;
use tungstenite::{Error as WsError, Message, WebSocket};

use crate::bus::{Publisher, Subscriber};
use crate::gateway::{Gateway, REPORT_TOPIC};

#[derive(Deserialize)]
#[serde(untagged)]
enum ClientFrame {
    Op {
        op: String,
        filter: String,
    },
    Command {
        topic: String,
        #[serde(default)]
        payload: serde_json::Value,
    },
}

pub struct WsServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl WsServer {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shutdown.store(true, Ordering::Relaxed);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for WsServer {
    fn drop(&mut self) {
        self.stop();
    }
}

pub fn serve_ws(listener: TcpListener, gateway: Arc<Gateway>) -> std::io::Result<WsServer> {
    let addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let flag = shutdown.clone();
    let accept = std::thread::spawn(move || {
        let replies = Arc::new(Publisher::new("wire"));
        while !flag.load(Ordering::Relaxed) {
            match listener.accept() {
                Ok((stream, peer)) => {
                    let (gw, flag, replies) = (gateway.clone(), flag.clone(), replies.clone());
                    std::thread::spawn(move || {
                        if let Err(e) = connection(stream, peer, &gw, &flag, &replies) {
                            debug!("connection {peer} ended: {e}");
                        }
                    });
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(10)),
                Err(e) => warn!("accept failed: {e}"),
            }
        }
    });
    info!("websocket server on ws://{addr}");
    Ok(WsServer { addr, shutdown, accept: Some(accept) })
}

fn query_param(req: &Request, key: &str) -> Option<String> {
    let q = req.uri().query()?;
    form_urlencoded::parse(q.as_bytes()).find(|(k, _)| k == key).map(|(_, v)| v.into_owned())
}

fn bearer(req: &Request) -> Option<String> {
    let h = req.headers().get("authorization")?.to_str().ok()?;
    h.strip_prefix("Bearer ").map(str::to_string)
}

fn rejected(status: StatusCode, text: &str) -> ErrorResponse {
    let mut r = ErrorResponse::new(Some(text.to_string()));
    *r.status_mut() = status;
    r
}

fn would_block(e: &WsError) -> bool {
    matches!(e, WsError::Io(io) if io.kind() == ErrorKind::WouldBlock)
}

fn connection(stream: TcpStream, peer: SocketAddr, gateway: &Gateway, shutdown: &AtomicBool, replies: &Publisher) -> anyhow::Result<()> {
    stream.set_nodelay(true)?;
    let mut identity = None;
    let callback = |req: &Request, resp: Response| {
        let token = query_param(req, "token").or_else(|| bearer(req));
        match token.as_deref().and_then(|t| gateway.authenticate(t)) {
            Some(role) => {
                identity = Some((role.to_string(), query_param(req, "name")));
                Ok(resp)
            }
            None => Err(rejected(StatusCode::UNAUTHORIZED, "unknown or missing token")),
        }
    };
    let mut ws = tungstenite::accept_hdr(stream, callback).map_err(|e| anyhow::anyhow!("handshake: {e}"))?;
    let (role, name) = identity.expect("handshake succeeded after authentication");
    ws.get_mut().set_nonblocking(true)?;
    let sub = gateway.connect(&format!("{role}@{peer}"), &role);
    let issuer = name.unwrap_or_else(|| format!("{role}#{}", sub.id()));
    info!("{issuer} connected from {peer}");

    // When the socket cannot take more, stop pulling from the bus queue so
    // a slow client backs up there and eventually gets evicted.
    let mut blocked = false;
    while !shutdown.load(Ordering::Relaxed) {
        let mut busy = false;
        if blocked {
            match ws.flush() {
                Ok(()) => blocked = false,
                Err(e) if would_block(&e) => {}
                Err(e) => return Err(e.into()),
            }
        }
        while !blocked {
            match sub.receiver().try_recv() {
                Ok(env) => {
                    busy = true;
                    blocked = send(&mut ws, &env.wire())?;
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return evicted(&mut ws, &sub),
            }
        }
        match ws.read() {
            Ok(Message::Text(text)) => {
                busy = true;
                client_frame(gateway, &sub, &role, &issuer, replies, text.as_str());
            }
            Ok(Message::Close(_)) => {
                let _ = ws.flush();
                return Ok(());
            }
            Ok(_) => busy = true,
            Err(e) if would_block(&e) => {}
            Err(WsError::ConnectionClosed | WsError::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e.into()),
        }
        if !busy {
            if blocked {
                std::thread::sleep(Duration::from_millis(1));
            } else {
                match sub.receiver().recv_timeout(Duration::from_millis(5)) {
                    Ok(env) => blocked = send(&mut ws, &env.wire())?,
                    Err(RecvTimeoutError::Timeout) => {}
                    Err(RecvTimeoutError::Disconnected) => return evicted(&mut ws, &sub),
                }
            }
        }
    }
    let _ = ws.close(None);
    let _ = ws.flush();
    Ok(())
}

/// Queues one frame; true when the socket pushed back.
fn send(ws: &mut WebSocket<TcpStream>, text: &str) -> anyhow::Result<bool> {
    let r = ws.write(Message::text(text)).and_then(|_| ws.flush());
    match r {
        Ok(()) => Ok(false),
        Err(e) if would_block(&e) => Ok(true),
        Err(e) => Err(e.into()),
    }
}

fn evicted(ws: &mut WebSocket<TcpStream>, sub: &Subscriber) -> anyhow::Result<()> {
    let reason = sub.disconnect_reason().unwrap_or_else(|| "disconnected".into());
    let _ = ws.close(Some(CloseFrame { code: CloseCode::Policy, reason: reason.clone().into() }));
    for _ in 0..100 {
        match ws.flush() {
            Err(e) if would_block(&e) => std::thread::sleep(Duration::from_millis(5)),
            _ => break,
        }
    }
    anyhow::bail!("evicted: {reason}")
}

fn client_frame(gateway: &Gateway, sub: &Subscriber, role: &str, issuer: &str, replies: &Publisher, text: &str) {
    let sim = gateway.sim_time();
    let reply = |body: serde_json::Value| {
        let _ = gateway.broker().send_to(sub.id(), replies, "notif/op", sim, &body);
    };
    match serde_json::from_str::<ClientFrame>(text) {
        Ok(ClientFrame::Op { op, filter }) => {
            let result = match op.as_str() {
                "sub" => sub.subscribe(&filter).map_err(|e| e.to_string()),
                "unsub" => {
                    sub.unsubscribe(&filter);
                    Ok(())
                }
                other => Err(format!("unknown op `{other}`")),
            };
            match result {
                Ok(()) => reply(json!({ "op": op, "filter": filter, "ok": true })),
                Err(e) => reply(json!({ "op": op, "filter": filter, "ok": false, "error": e })),
            }
        }
        Ok(ClientFrame::Command { topic, .. }) if topic == REPORT_TOPIC => gateway.request_report(sub.id()),
        Ok(ClientFrame::Command { topic, payload }) if topic.starts_with("command/") => {
            gateway.submit(issuer, role, &topic, payload);
        }
        Ok(ClientFrame::Command { topic, .. }) => reply(json!({ "ok": false, "error": format!("clients may only publish on command/..., not `{topic}`") })),
        Err(e) => reply(json!({ "ok": false, "error": format!("unreadable frame: {e}") })),
    }
}
