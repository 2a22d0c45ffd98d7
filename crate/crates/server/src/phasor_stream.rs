//! Optional TCP side channel carrying one synchrophasor data frame per step
//! for a fixed set of buses. Each new connection first receives the config
//! frame naming the channels.

use std::io::Write;
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use gridops_core::phasor::{encode_config_frame, encode_data_frame, ConfigFrame, DataFrame, FrameHeader};
use gridops_core::powerflow::Measurements;

/// Unix time of the scenario day's midnight used for frame timestamps
/// (2024-01-01T00:00:00Z).
pub const SCENARIO_EPOCH: u32 = 1_704_067_200;
pub const DEFAULT_CHANNELS: usize = 8;
const IDCODE: u16 = 1;

pub struct PhasorStream {
    clients: Mutex<Vec<TcpStream>>,
    /// Bus positions in the measurement vector.
    buses: Vec<usize>,
    config: Vec<u8>,
}

pub fn timestamp(sim_time: f64) -> FrameHeader {
    let whole = sim_time.floor();
    let fraction = ((sim_time - whole) * 1e6).round() as u32 & 0x00FF_FFFF;
    FrameHeader { idcode: IDCODE, soc: SCENARIO_EPOCH.wrapping_add(whole as u32), fracsec: fraction }
}

impl PhasorStream {
    /// `buses` are `(position, id)` pairs in channel order.
    pub fn new(buses: &[(usize, u32)]) -> Arc<PhasorStream> {
        let config = encode_config_frame(&ConfigFrame {
            header: FrameHeader { idcode: IDCODE, soc: SCENARIO_EPOCH, fracsec: 0 },
            nominal_hz: 60,
            channels: buses.iter().map(|(_, id)| format!("BUS{id}")).collect(),
        })
        .expect("bus names fit the channel name field");
        Arc::new(PhasorStream { clients: Mutex::new(Vec::new()), buses: buses.iter().map(|b| b.0).collect(), config })
    }

    /// Accepts subscribers on a background thread.
    pub fn listen(self: &Arc<Self>, listener: TcpListener) {
        let this = self.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let _ = stream.set_nodelay(true);
                let _ = stream.set_write_timeout(Some(Duration::from_millis(200)));
                let mut s = stream;
                if s.write_all(&this.config).is_ok() {
                    this.clients.lock().unwrap().push(s);
                }
            }
        });
    }

    pub fn frame(&self, m: &Measurements) -> Vec<u8> {
        let frame = DataFrame {
            header: timestamp(m.sim_time),
            phasors: self.buses.iter().map(|&i| (m.buses[i].v_pu as f32, m.buses[i].angle as f32)).collect(),
            freq_deviation: m.delta_f as f32,
        };
        encode_data_frame(&frame, self.buses.len().max(1)).expect("channel count fixed at construction")
    }

    /// Sends the step's frame; clients that cannot keep up are dropped.
    pub fn publish(&self, m: &Measurements) {
        let bytes = self.frame(m);
        self.clients.lock().unwrap().retain_mut(|c| c.write_all(&bytes).is_ok());
    }
}
