use std::collections::VecDeque;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::path::Path;
use std::time::{Duration, Instant};

/// Lines kept while a TCP peer is unreachable.
pub const TCP_BUFFER_LINES: usize = 4096;
const RECONNECT_INTERVAL: Duration = Duration::from_millis(250);
const CONNECT_TIMEOUT: Duration = Duration::from_millis(500);

/// Newline-delimited JSON over one TCP connection. While the peer is
/// unreachable, lines are held in a bounded buffer and reconnection is
/// retried periodically; once the buffer is full the oldest lines are
/// dropped and counted.
pub struct TcpSink {
    addr: String,
    stream: Option<TcpStream>,
    pending: VecDeque<String>,
    capacity: usize,
    last_attempt: Option<Instant>,
    pub dropped: u64,
}

impl TcpSink {
    pub fn new(addr: &str, capacity: usize) -> Self {
        let mut s = Self {
            addr: addr.to_string(),
            stream: None,
            pending: VecDeque::new(),
            capacity,
            last_attempt: None,
            dropped: 0,
        };
        s.try_connect();
        s
    }

    fn try_connect(&mut self) {
        if self.last_attempt.is_some_and(|t| t.elapsed() < RECONNECT_INTERVAL) {
            return;
        }
        self.last_attempt = Some(Instant::now());
        let Ok(mut addrs) = self.addr.to_socket_addrs() else {
            return;
        };
        if let Some(a) = addrs.next() {
            if let Ok(s) = TcpStream::connect_timeout(&a, CONNECT_TIMEOUT) {
                let _ = s.set_nodelay(true);
                self.stream = Some(s);
            }
        }
    }

    pub fn is_connected(&self) -> bool {
        self.stream.is_some()
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn write_line(&mut self, line: &str) {
        if self.pending.len() == self.capacity {
            self.pending.pop_front();
            self.dropped += 1;
        }
        self.pending.push_back(line.to_string());
        self.pump();
    }

    fn pump(&mut self) {
        if self.stream.is_none() {
            self.try_connect();
        }
        while let (Some(stream), Some(line)) = (self.stream.as_mut(), self.pending.front()) {
            let ok = stream.write_all(line.as_bytes()).and_then(|_| stream.write_all(b"\n"));
            if ok.is_err() {
                self.stream = None;
                break;
            }
            self.pending.pop_front();
        }
    }

    /// Final delivery attempt; whatever is still pending is dropped.
    pub fn finish(&mut self) {
        self.last_attempt = None;
        self.pump();
        if let Some(s) = self.stream.as_mut() {
            let _ = s.flush();
        }
        self.dropped += self.pending.len() as u64;
        self.pending.clear();
    }
}

/// Destination of one JSON stream.
pub enum Sink {
    Stdout(io::Stdout),
    File(BufWriter<File>),
    Tcp(TcpSink),
    Writer(Box<dyn Write + Send>),
}

impl Sink {
    /// `-` for stdout, `tcp://host:port`, or a file path.
    pub fn open(spec: &str) -> io::Result<Self> {
        if spec == "-" {
            Ok(Sink::Stdout(io::stdout()))
        } else if let Some(addr) = spec.strip_prefix("tcp://") {
            Ok(Sink::Tcp(TcpSink::new(addr, TCP_BUFFER_LINES)))
        } else {
            Ok(Sink::File(BufWriter::new(File::create(Path::new(spec))?)))
        }
    }

    pub fn write_line(&mut self, line: &str) -> io::Result<()> {
        match self {
            Sink::Stdout(s) => writeln!(s.lock(), "{line}"),
            Sink::File(f) => writeln!(f, "{line}"),
            Sink::Tcp(t) => {
                t.write_line(line);
                Ok(())
            }
            Sink::Writer(w) => writeln!(w, "{line}"),
        }
    }

    pub fn finish(&mut self) -> io::Result<()> {
        match self {
            Sink::Stdout(s) => s.flush(),
            Sink::File(f) => f.flush(),
            Sink::Tcp(t) => {
                t.finish();
                Ok(())
            }
            Sink::Writer(w) => w.flush(),
        }
    }

    /// Lines dropped because a network peer was unreachable.
    pub fn dropped(&self) -> u64 {
        match self {
            Sink::Tcp(t) => t.dropped,
            _ => 0,
        }
    }
}
