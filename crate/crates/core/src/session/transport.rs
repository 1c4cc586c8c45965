//! Newline-delimited JSON over TCP: one `Request` per line in, one
//! `Response` per line out.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread;

use super::message::{ErrorBody, Message, Reply, Request, Response};
use super::service::SessionService;
use super::store::EventStore;
use super::SessionError;
use crate::protocol::StudyTag;

/// Anything a client can drive a session through.
pub trait SessionApi {
    fn create(&mut self, study: StudyTag, seed: u64) -> Result<Reply, SessionError>;
    fn send(&mut self, session: &str, message: &Message) -> Result<Reply, SessionError>;
}

impl<S: EventStore> SessionApi for SessionService<S> {
    fn create(&mut self, study: StudyTag, seed: u64) -> Result<Reply, SessionError> {
        self.create_session(study, seed)
    }

    fn send(&mut self, session: &str, message: &Message) -> Result<Reply, SessionError> {
        self.handle_message(session, message)
    }
}

impl<S: EventStore> SessionApi for Arc<SessionService<S>> {
    fn create(&mut self, study: StudyTag, seed: u64) -> Result<Reply, SessionError> {
        self.create_session(study, seed)
    }

    fn send(&mut self, session: &str, message: &Message) -> Result<Reply, SessionError> {
        self.handle_message(session, message)
    }
}

fn transport(e: std::io::Error) -> SessionError {
    SessionError::Transport(e.to_string())
}

/// Answers requests on one connection until the peer hangs up.
pub fn serve_connection<S: EventStore>(stream: TcpStream, service: &SessionService<S>) -> std::io::Result<()> {
    let mut writer = stream.try_clone()?;
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Request>(&line) {
            Ok(req) => service.handle_request(&req),
            Err(e) => Response::Err {
                ok: false,
                error: ErrorBody { code: "malformed".into(), message: e.to_string(), expected_phase: None },
            },
        };
        let mut out = serde_json::to_string(&response).expect("responses always serialize");
        out.push('\n');
        writer.write_all(out.as_bytes())?;
        writer.flush()?;
    }
    Ok(())
}

/// Accepts connections forever, one thread each.
pub fn serve<S: EventStore + 'static>(listener: TcpListener, service: Arc<SessionService<S>>) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let svc = Arc::clone(&service);
        thread::spawn(move || {
            let _ = serve_connection(stream, &svc);
        });
    }
    Ok(())
}

pub struct TcpClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl TcpClient {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<TcpClient, SessionError> {
        let stream = TcpStream::connect(addr).map_err(transport)?;
        let writer = stream.try_clone().map_err(transport)?;
        Ok(TcpClient { reader: BufReader::new(stream), writer })
    }

    pub fn request(&mut self, req: &Request) -> Result<Response, SessionError> {
        let mut line = serde_json::to_string(req).map_err(|e| SessionError::Malformed(e.to_string()))?;
        line.push('\n');
        self.send_raw(&line)
    }

    /// Sends one raw line and reads one response.
    pub fn send_raw(&mut self, line: &str) -> Result<Response, SessionError> {
        self.writer.write_all(line.as_bytes()).map_err(transport)?;
        self.writer.flush().map_err(transport)?;
        let mut buf = String::new();
        let n = self.reader.read_line(&mut buf).map_err(transport)?;
        if n == 0 {
            return Err(SessionError::Transport("server closed the connection".into()));
        }
        serde_json::from_str(&buf).map_err(|e| SessionError::Malformed(format!("response: {e}")))
    }

    fn call(&mut self, req: &Request) -> Result<Reply, SessionError> {
        match self.request(req)? {
            Response::Ok { reply, .. } => Ok(*reply),
            Response::Err { error, .. } => Err(SessionError::Remote(error)),
        }
    }
}

impl SessionApi for TcpClient {
    fn create(&mut self, study: StudyTag, seed: u64) -> Result<Reply, SessionError> {
        self.call(&Request::Create { study, seed })
    }

    fn send(&mut self, session: &str, message: &Message) -> Result<Reply, SessionError> {
        self.call(&Request::Message { session: session.to_string(), message: message.clone() })
    }
}
