use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::backend::TokenCounts;
use super::template::Message;

/// One backend attempt, successful or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub exchange_id: u64,
    pub template_id: String,
    pub messages: Vec<Message>,
    pub response_text: Option<String>,
    pub latency_ms: u64,
    pub token_counts: Option<TokenCounts>,
    pub attempt: u32,
    pub error: Option<String>,
}

/// Append-only record of every exchange; ids are sequential from 1.
#[derive(Debug, Default)]
pub struct AuditLog {
    inner: Mutex<Inner>,
}

#[derive(Debug, Default)]
struct Inner {
    next_id: u64,
    records: Vec<ChatExchange>,
    sink: Option<BufWriter<File>>,
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Also mirror every exchange to `path` as JSONL.
    pub fn with_file(path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(AuditLog {
            inner: Mutex::new(Inner {
                sink: Some(BufWriter::new(file)),
                ..Default::default()
            }),
        })
    }

    /// Assign the next id to `exchange` and store it. Returns the id.
    pub fn append(&self, mut exchange: ChatExchange) -> u64 {
        let mut inner = self.inner.lock().unwrap();
        inner.next_id += 1;
        exchange.exchange_id = inner.next_id;
        if let Some(sink) = inner.sink.as_mut() {
            let written = serde_json::to_writer(&mut *sink, &exchange)
                .map_err(std::io::Error::from)
                .and_then(|_| sink.write_all(b"\n"))
                .and_then(|_| sink.flush());
            if let Err(e) = written {
                log::warn!("audit log write failed: {e}");
            }
        }
        inner.records.push(exchange);
        inner.next_id
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Vec<ChatExchange> {
        self.inner.lock().unwrap().records.clone()
    }

    pub fn get(&self, exchange_id: u64) -> Option<ChatExchange> {
        let inner = self.inner.lock().unwrap();
        inner
            .records
            .iter()
            .find(|r| r.exchange_id == exchange_id)
            .cloned()
    }

    pub fn write_jsonl(&self, w: &mut impl Write) -> std::io::Result<()> {
        for r in self.inner.lock().unwrap().records.iter() {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}
