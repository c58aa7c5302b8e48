//! Threaded TCP front end for the store: one request per connection,
//! writer-serialized state, optional append-only persistence.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use crate::cloud::http::{read_request, Request, Response};
use crate::cloud::{self, Store, StoreError, StoredUpdate};
use crate::codec::EquipmentRegistry;

struct Shared {
    store: Store,
    wal: Option<BufWriter<File>>,
}

/// A running mock cloud instance.
pub struct CloudServer {
    addr: std::net::SocketAddr,
    shutdown: Arc<AtomicBool>,
    shared: Arc<Mutex<Shared>>,
    accept_thread: Option<JoinHandle<()>>,
}

impl CloudServer {
    /// Bind `addr` (use port 0 for an ephemeral port) and serve. When
    /// `state_path` is given, existing state is replayed from it on start
    /// and every accepted PATCH is appended to it.
    pub fn start(
        addr: &str,
        registry: &EquipmentRegistry,
        state_path: Option<&Path>,
    ) -> Result<CloudServer, StoreError> {
        let store = match state_path {
            Some(p) if p.exists() => cloud::load(p, registry)?,
            _ => Store::new(registry),
        };
        let wal = match state_path {
            Some(p) => {
                let file = OpenOptions::new().create(true).append(true).open(p)?;
                Some(BufWriter::new(file))
            }
            None => None,
        };
        let listener = TcpListener::bind(addr)?;
        let local = listener.local_addr()?;
        let shared = Arc::new(Mutex::new(Shared { store, wal }));
        let shutdown = Arc::new(AtomicBool::new(false));

        let accept_shared = Arc::clone(&shared);
        let accept_shutdown = Arc::clone(&shutdown);
        let accept_thread = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if accept_shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let conn_shared = Arc::clone(&accept_shared);
                std::thread::spawn(move || handle_connection(stream, &conn_shared));
            }
        });

        Ok(CloudServer {
            addr: local,
            shutdown,
            shared,
            accept_thread: Some(accept_thread),
        })
    }

    pub fn addr(&self) -> std::net::SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Snapshot of the current store.
    pub fn store(&self) -> Store {
        self.shared.lock().expect("store lock").store.clone()
    }

    /// Stop accepting and join the accept loop. In-flight connection
    /// threads finish on their own.
    pub fn stop(mut self) {
        self.shutdown_inner();
    }

    fn shutdown_inner(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // poke the accept loop awake
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.accept_thread.take() {
            let _ = handle.join();
        }
        if let Some(wal) = self.shared.lock().expect("store lock").wal.as_mut() {
            let _ = wal.flush();
        }
    }
}

impl Drop for CloudServer {
    fn drop(&mut self) {
        if self.accept_thread.is_some() {
            self.shutdown_inner();
        }
    }
}

fn handle_connection(mut stream: TcpStream, shared: &Mutex<Shared>) {
    let response = match read_request(&mut stream) {
        Ok(request) => route(&request, shared),
        Err(e) => Response::json(
            400,
            serde_json::to_vec(&serde_json::json!({ "error": e.to_string() })).unwrap(),
        ),
    };
    let _ = response.write_to(&mut stream);
}

/// Dispatch one request against the store.
fn route(request: &Request, shared: &Mutex<Shared>) -> Response {
    let path = request.target.split('?').next().unwrap_or("");
    let mut guard = shared.lock().expect("store lock");
    match (request.method.as_str(), path) {
        ("GET", "/dashboard.json") => cloud::handle_get_dashboard(&guard.store),
        ("GET", _) => match machine_from_path(path) {
            Some(machine) => cloud::handle_get_equipment(&guard.store, machine),
            None => not_found(path),
        },
        ("PATCH", _) => match machine_from_path(path) {
            Some(machine) => {
                let machine = machine.to_string();
                let response = cloud::handle_patch(&mut guard.store, &machine, &request.body);
                if response.status == 200 {
                    if let Ok(update) =
                        serde_json::from_slice::<crate::gateway::PatchBody>(&request.body)
                    {
                        append_wal(
                            &mut guard,
                            &StoredUpdate {
                                t: update.t,
                                machine,
                                reps: update.reps,
                            },
                        );
                    }
                }
                response
            }
            None => not_found(path),
        },
        _ => Response::json(
            405,
            serde_json::to_vec(&serde_json::json!({ "error": "method not allowed" })).unwrap(),
        ),
    }
}

fn append_wal(shared: &mut Shared, update: &StoredUpdate) {
    if let Some(wal) = shared.wal.as_mut() {
        let line = serde_json::to_string(update).expect("update serializes");
        let _ = writeln!(wal, "{line}");
        let _ = wal.flush();
    }
}

fn not_found(path: &str) -> Response {
    Response::json(
        404,
        serde_json::to_vec(&serde_json::json!({ "error": format!("no route for {path}") }))
            .unwrap(),
    )
}

fn machine_from_path(path: &str) -> Option<&str> {
    path.strip_prefix("/equipment/")?
        .strip_suffix(".json")
        .filter(|m| !m.is_empty())
}

/// Blocking server entry point for the CLI `serve` subcommand.
pub fn serve_forever(
    addr: &str,
    registry: &EquipmentRegistry,
    state_path: Option<PathBuf>,
) -> Result<(), StoreError> {
    let server = CloudServer::start(addr, registry, state_path.as_deref())?;
    println!("listening on {}", server.base_url());
    println!(
        "routes: GET /dashboard.json  GET /equipment/<name>.json  PATCH /equipment/<name>.json"
    );
    let _ = std::io::stdout().flush();
    // Park this thread; the accept loop owns the work.
    loop {
        std::thread::park();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn machine_path_extraction() {
        assert_eq!(
            machine_from_path("/equipment/leg_curl.json"),
            Some("leg_curl")
        );
        assert_eq!(machine_from_path("/equipment/.json"), None);
        assert_eq!(machine_from_path("/dashboard.json"), None);
        assert_eq!(machine_from_path("/equipment/leg_curl"), None);
    }
}
