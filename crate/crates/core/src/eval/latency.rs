use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::auth::{PearsonAuthenticator, TrainedModel};
use crate::features::{amplitude_features, extract, ProbeWindow, WINDOW_LEN};
use crate::trace_format::{read_trace, write_trace, ProbeAssembler, SrsProbe};

pub const STAGES: [&str; 4] = ["parse", "extract", "dl_inference", "pearson"];
pub const WARMUP_PROBES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLatency {
    pub stage: String,
    pub mean_us: f64,
    pub max_us: f64,
    pub std_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyTable {
    pub n_probes: usize,
    pub warmup_probes: usize,
    pub stages: Vec<StageLatency>,
    /// Mean wall time of all four stages together.
    pub total_mean_us: f64,
    /// Mean cost of one pair of clock reads.
    pub timer_overhead_us: f64,
}

impl LatencyTable {
    pub fn stage(&self, name: &str) -> Option<&StageLatency> {
        self.stages.iter().find(|s| s.stage == name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("stage,mean_us,max_us,std_us\n");
        for st in &self.stages {
            s.push_str(&format!("{},{},{},{}\n", st.stage, st.mean_us, st.max_us, st.std_us));
        }
        s
    }
}

fn summarize(stage: &str, samples: &[f64]) -> StageLatency {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    StageLatency {
        stage: stage.to_string(),
        mean_us: mean,
        max_us: samples.iter().cloned().fold(0.0, f64::max),
        std_us: var.sqrt(),
    }
}

fn micros(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e6
}

/// Times the per-probe pipeline stages over `n_probes` probes after
/// [`WARMUP_PROBES`] untimed ones. Each probe is decoded from its own
/// serialized records; `probes` is cycled if shorter than needed, with the
/// Doppler history reset at every wrap.
pub fn bench_latency(
    probes: &[SrsProbe],
    model: &mut TrainedModel,
    pearson: &PearsonAuthenticator,
    n_probes: usize,
) -> Result<LatencyTable, EvalError> {
    if probes.is_empty() || n_probes == 0 {
        return Err(EvalError::Bench("need at least one probe and one timed iteration".into()));
    }
    let buffers: Vec<Vec<u8>> = probes
        .iter()
        .map(|p| write_trace(&p.to_records()).map_err(|e| EvalError::Bench(e.to_string())))
        .collect::<Result<_, _>>()?;
    let mut samples: [Vec<f64>; 4] = Default::default();
    let mut totals = Vec::with_capacity(n_probes);
    let mut history: VecDeque<SrsProbe> = VecDeque::with_capacity(WINDOW_LEN);
    for i in 0..WARMUP_PROBES + n_probes {
        let k = i % buffers.len();
        if k == 0 {
            history.clear();
        }
        let start = Instant::now();

        let t = Instant::now();
        let records = read_trace(&buffers[k]).map_err(|e| EvalError::Bench(e.to_string()))?;
        let mut asm = ProbeAssembler::new();
        let mut out = Vec::with_capacity(1);
        for r in records {
            asm.push(r, &mut out).map_err(|e| EvalError::Bench(e.to_string()))?;
        }
        asm.flush_into(&mut out);
        let probe = out.pop().ok_or_else(|| EvalError::Bench("probe did not assemble".into()))?;
        let parse = micros(t);

        let t = Instant::now();
        let past = history.make_contiguous();
        let fv = extract(&ProbeWindow::new(&probe, past).map_err(EvalError::Bench)?);
        let extract_us = micros(t);

        let t = Instant::now();
        let (p_legit, _) = model.forward(&fv.values)?;
        let dl = micros(t);

        let t = Instant::now();
        let rho = pearson.score_amplitudes(&amplitude_features(&probe));
        let pearson_us = micros(t);

        let total = micros(start);
        std::hint::black_box((p_legit, rho));
        if history.len() == WINDOW_LEN - 1 {
            history.pop_front();
        }
        history.push_back(probe);
        if i >= WARMUP_PROBES {
            for (s, v) in samples.iter_mut().zip([parse, extract_us, dl, pearson_us]) {
                s.push(v);
            }
            totals.push(total);
        }
    }
    let overhead = {
        let reps = 10_000;
        let t = Instant::now();
        for _ in 0..reps {
            std::hint::black_box(Instant::now().elapsed());
        }
        micros(t) / reps as f64
    };
    Ok(LatencyTable {
        n_probes,
        warmup_probes: WARMUP_PROBES,
        stages: STAGES.iter().zip(&samples).map(|(name, s)| summarize(name, s)).collect(),
        total_mean_us: totals.iter().sum::<f64>() / totals.len() as f64,
        timer_overhead_us: overhead,
    })
}
