use serde_json::{json, Value as Json};

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorEvent {
    pub op_id: usize,
    pub name: &'static str,
    pub label: String,
    pub start_ns: u64,
    pub dur_ns: u64,
    pub rows_out: usize,
    /// Bytes of tensors allocated by the operator's instructions.
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelEvent {
    pub op_id: usize,
    pub name: &'static str,
    pub start_ns: u64,
    pub dur_ns: u64,
    pub rows: usize,
    pub bytes: usize,
}

/// Per-operator and per-instruction timings of one execution, in
/// execution order.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileTrace {
    pub backend: String,
    pub operators: Vec<OperatorEvent>,
    pub kernels: Vec<KernelEvent>,
}

fn micros(ns: u64) -> f64 {
    ns as f64 / 1000.0
}

impl ProfileTrace {
    pub fn new(backend: &str) -> Self {
        ProfileTrace {
            backend: backend.to_string(),
            operators: Vec::new(),
            kernels: Vec::new(),
        }
    }

    pub fn kernel_time_ns(&self) -> u64 {
        self.kernels.iter().map(|k| k.dur_ns).sum()
    }

    /// Chrome trace-event array: operators on thread 0, instructions on
    /// thread 1, preceded by metadata naming the backend.
    pub fn to_chrome_json(&self) -> Json {
        let mut events = vec![
            json!({"name": "process_name", "ph": "M", "pid": 0, "tid": 0,
                   "args": {"name": format!("tensql ({})", self.backend)}}),
            json!({"name": "thread_name", "ph": "M", "pid": 0, "tid": 0, "args": {"name": "operators"}}),
            json!({"name": "thread_name", "ph": "M", "pid": 0, "tid": 1, "args": {"name": "kernels"}}),
        ];
        for o in &self.operators {
            events.push(json!({
                "name": format!("{}#{}", o.name, o.op_id),
                "cat": "operator",
                "ph": "X",
                "pid": 0,
                "tid": 0,
                "ts": micros(o.start_ns),
                "dur": micros(o.dur_ns),
                "args": {"rows": o.rows_out, "bytes": o.bytes, "label": o.label},
            }));
        }
        for k in &self.kernels {
            events.push(json!({
                "name": k.name,
                "cat": "kernel",
                "ph": "X",
                "pid": 0,
                "tid": 1,
                "ts": micros(k.start_ns),
                "dur": micros(k.dur_ns),
                "args": {"rows": k.rows, "bytes": k.bytes, "op": k.op_id},
            }));
        }
        Json::Array(events)
    }
}
