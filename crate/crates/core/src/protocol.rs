//! Newline-delimited JSON over TCP, so an agent can drive an environment that
//! lives in another process or on another machine.
//!
//! Each request line gets exactly one response line, in order. Requests:
//!
//! ```text
//! {"type":"hello","version":1}
//! {"type":"reset","seed":7}          (seed optional)
//! {"type":"step","u_x":0.8}
//! {"type":"close"}
//! ```
//!
//! Responses are `hello_ack`, `state`, `closed` or `error{code,message}`.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::time::Duration;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvError, Environment, StepInfo, StepOutcome};
use crate::sensors::Observation;

pub const PROTOCOL_VERSION: u32 = 1;
pub const OBS_FIELDS: [&str; 3] = ["x_dot", "z_ddot_meas", "p"];

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: String, source: io::Error },
    #[error("connection lost: {0}")]
    ConnectionLost(String),
    #[error("timed out waiting for the server")]
    Timeout,
    #[error("server speaks protocol version {server}, client speaks {client}")]
    VersionMismatch { server: u32, client: u32 },
    #[error("server error {code:?}: {message}")]
    Server { code: ErrorCode, message: String },
    #[error("unexpected response: {0}")]
    UnexpectedResponse(String),
    #[error("environment factory: {0}")]
    Factory(String),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    Hello {
        version: u32,
    },
    Reset {
        #[serde(default)]
        seed: Option<u64>,
    },
    Step {
        u_x: f64,
    },
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    BadRequest,
    NotReset,
    VersionMismatch,
    EnvError,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Response {
    HelloAck {
        version: u32,
        obs_spec: Vec<String>,
        action_spec: ActionSpec,
    },
    /// After a reset `reward` is 0, `done` is false and `info` is absent.
    State {
        obs: Observation,
        reward: f64,
        done: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        info: Option<StepInfo>,
    },
    Closed,
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl Response {
    fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        Response::Error { code, message: message.into() }
    }
}

/// Per-connection request handling, independent of the transport.
pub struct Session<E: Environment> {
    env: E,
    next_seed: u64,
}

impl<E: Environment> Session<E> {
    pub fn new(env: E) -> Self {
        Self { env, next_seed: 0 }
    }

    /// Answers one raw request line. The flag is true when the client asked to close.
    pub fn handle_line(&mut self, line: &str) -> (Response, bool) {
        match serde_json::from_str::<Request>(line) {
            Ok(req) => self.handle(req),
            Err(e) => (Response::error(ErrorCode::BadRequest, e.to_string()), false),
        }
    }

    pub fn handle(&mut self, req: Request) -> (Response, bool) {
        let resp = match req {
            Request::Hello { version } if version == PROTOCOL_VERSION => {
                let (low, high) = self.env.action_bounds();
                Response::HelloAck {
                    version: PROTOCOL_VERSION,
                    obs_spec: OBS_FIELDS.iter().map(|s| s.to_string()).collect(),
                    action_spec: ActionSpec { low, high },
                }
            }
            Request::Hello { version } => Response::error(
                ErrorCode::VersionMismatch,
                format!("server speaks version {PROTOCOL_VERSION}, client sent {version}"),
            ),
            Request::Reset { seed } => {
                let seed = seed.unwrap_or(self.next_seed);
                self.next_seed = seed.wrapping_add(1);
                match self.env.reset(seed) {
                    Ok(obs) => Response::State { obs, reward: 0.0, done: false, info: None },
                    Err(e) => env_error(e),
                }
            }
            Request::Step { u_x } => match self.env.step(u_x) {
                Ok(StepOutcome { obs, reward, done, info }) => Response::State { obs, reward, done, info: Some(info) },
                Err(e) => env_error(e),
            },
            Request::Close => return (Response::Closed, true),
        };
        (resp, false)
    }
}

fn env_error(e: EnvError) -> Response {
    let code = match e {
        EnvError::NotReset => ErrorCode::NotReset,
        EnvError::NonFiniteAction(_) => ErrorCode::BadRequest,
        _ => ErrorCode::EnvError,
    };
    Response::error(code, e.to_string())
}

pub struct Server {
    listener: TcpListener,
}

impl Server {
    pub fn bind(addr: &str) -> Result<Self, ProtocolError> {
        let listener =
            TcpListener::bind(addr).map_err(|source| ProtocolError::BindFailure { addr: addr.to_string(), source })?;
        Ok(Self { listener })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, ProtocolError> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts one client at a time, each with a fresh environment from
    /// `make_env`. Returns after a client sends `close`; a client that just
    /// disconnects frees the slot for the next one.
    pub fn serve<E, F>(&self, mut make_env: F) -> Result<(), ProtocolError>
    where
        E: Environment,
        F: FnMut() -> Result<E, EnvError>,
    {
        loop {
            let (stream, peer) = self.listener.accept()?;
            info!("client connected from {peer}");
            let env = make_env().map_err(|e| ProtocolError::Factory(e.to_string()))?;
            match run_session(stream, Session::new(env)) {
                Ok(true) => {
                    info!("client {peer} closed the session");
                    return Ok(());
                }
                Ok(false) => info!("client {peer} disconnected"),
                Err(e) => warn!("session with {peer} ended: {e}"),
            }
        }
    }
}

/// Binds `addr` and serves until a client closes.
pub fn serve<E, F>(make_env: F, addr: &str) -> Result<(), ProtocolError>
where
    E: Environment,
    F: FnMut() -> Result<E, EnvError>,
{
    let server = Server::bind(addr)?;
    info!("listening on {}", server.local_addr()?);
    server.serve(make_env)
}

fn run_session<E: Environment>(stream: TcpStream, mut session: Session<E>) -> io::Result<bool> {
    stream.set_nodelay(true)?;
    let mut writer = io::BufWriter::new(stream.try_clone()?);
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(false);
        }
        let (resp, close) = session.handle_line(line.trim_end_matches(['\n', '\r']));
        debug!("{} -> {:?}", line.trim_end(), resp);
        serde_json::to_writer(&mut writer, &resp)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        if close {
            return Ok(true);
        }
    }
}

/// Client side: an [`Environment`] whose reset and step run on a server.
pub struct RemoteEnv {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    bounds: (f64, f64),
    obs_spec: Vec<String>,
    line: String,
}

impl RemoteEnv {
    /// Connects and performs the version handshake. `timeout` bounds every
    /// subsequent read and write.
    pub fn connect(addr: impl ToSocketAddrs, timeout: Duration) -> Result<Self, ProtocolError> {
        Self::connect_with_version(addr, timeout, PROTOCOL_VERSION)
    }

    pub fn connect_with_version(
        addr: impl ToSocketAddrs,
        timeout: Duration,
        version: u32,
    ) -> Result<Self, ProtocolError> {
        let stream = TcpStream::connect(addr).map_err(|e| ProtocolError::ConnectionLost(e.to_string()))?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(timeout))?;
        stream.set_write_timeout(Some(timeout))?;
        let mut client = Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
            bounds: (0.0, 0.0),
            obs_spec: Vec::new(),
            line: String::new(),
        };
        match client.request(&Request::Hello { version }) {
            Ok(Response::HelloAck { version: v, obs_spec, action_spec }) => {
                if v != version {
                    return Err(ProtocolError::VersionMismatch { server: v, client: version });
                }
                client.bounds = (action_spec.low, action_spec.high);
                client.obs_spec = obs_spec;
                Ok(client)
            }
            Err(ProtocolError::Server { code: ErrorCode::VersionMismatch, .. }) => {
                Err(ProtocolError::VersionMismatch { server: PROTOCOL_VERSION, client: version })
            }
            Ok(other) => Err(ProtocolError::UnexpectedResponse(format!("{other:?}"))),
            Err(e) => Err(e),
        }
    }

    pub fn obs_spec(&self) -> &[String] {
        &self.obs_spec
    }

    /// Sends one request and waits for its response. In-band errors come back
    /// as [`ProtocolError::Server`].
    pub fn request(&mut self, req: &Request) -> Result<Response, ProtocolError> {
        let mut buf = serde_json::to_vec(req).map_err(|e| ProtocolError::UnexpectedResponse(e.to_string()))?;
        buf.push(b'\n');
        self.writer.write_all(&buf).map_err(io_to_protocol)?;
        self.line.clear();
        let n = self.reader.read_line(&mut self.line).map_err(io_to_protocol)?;
        if n == 0 {
            return Err(ProtocolError::ConnectionLost("server closed the connection".into()));
        }
        match serde_json::from_str::<Response>(&self.line) {
            Ok(Response::Error { code, message }) => Err(ProtocolError::Server { code, message }),
            Ok(resp) => Ok(resp),
            Err(e) => Err(ProtocolError::UnexpectedResponse(format!("{e}: {}", self.line.trim_end()))),
        }
    }

    /// Ends the session; the server stops after acknowledging.
    pub fn close(mut self) -> Result<(), ProtocolError> {
        match self.request(&Request::Close)? {
            Response::Closed => Ok(()),
            other => Err(ProtocolError::UnexpectedResponse(format!("{other:?}"))),
        }
    }
}

fn io_to_protocol(e: io::Error) -> ProtocolError {
    match e.kind() {
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => ProtocolError::Timeout,
        _ => ProtocolError::ConnectionLost(e.to_string()),
    }
}

fn remote_error(e: ProtocolError) -> EnvError {
    match e {
        ProtocolError::Server { code: ErrorCode::NotReset, .. } => EnvError::NotReset,
        other => EnvError::Remote(other),
    }
}

impl Environment for RemoteEnv {
    fn reset(&mut self, seed: u64) -> Result<Observation, EnvError> {
        match self.request(&Request::Reset { seed: Some(seed) }).map_err(remote_error)? {
            Response::State { obs, .. } => Ok(obs),
            other => Err(EnvError::Remote(ProtocolError::UnexpectedResponse(format!("{other:?}")))),
        }
    }

    fn step(&mut self, action: f64) -> Result<StepOutcome, EnvError> {
        if !action.is_finite() {
            return Err(EnvError::NonFiniteAction(action));
        }
        match self.request(&Request::Step { u_x: action }).map_err(remote_error)? {
            Response::State { obs, reward, done, info: Some(info) } => Ok(StepOutcome { obs, reward, done, info }),
            other => Err(EnvError::Remote(ProtocolError::UnexpectedResponse(format!("{other:?}")))),
        }
    }

    fn action_bounds(&self) -> (f64, f64) {
        self.bounds
    }
}
