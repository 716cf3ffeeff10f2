use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use tiny_http::{Header, Response, Server};

use super::{SimError, Site};

const WORKERS: usize = 4;

/// A running simulator endpoint. Dropping it stops the server.
pub struct SimServer {
    server: Arc<Server>,
    addr: SocketAddr,
    workers: Vec<JoinHandle<()>>,
}

impl SimServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}/", self.addr)
    }

    /// Blocks until the server is stopped from another thread.
    pub fn join(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for SimServer {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Serves `site` over HTTP/1.1 on `addr` (port 0 picks a free port).
pub fn serve(site: Arc<Site>, addr: &str) -> Result<SimServer, SimError> {
    let server = Server::http(addr).map_err(|e| SimError::BindFailure(e.to_string()))?;
    let local = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| SimError::BindFailure("not an IP listener".to_string()))?;
    let server = Arc::new(server);
    let workers = (0..WORKERS)
        .map(|_| {
            let server = Arc::clone(&server);
            let site = Arc::clone(&site);
            std::thread::spawn(move || {
                while let Ok(req) = server.recv() {
                    let resp = if *req.method() == tiny_http::Method::Get {
                        site.handle(req.url())
                    } else {
                        super::HttpResponse {
                            status: 405,
                            content_type: "text/plain",
                            body: "method not allowed".to_string(),
                        }
                    };
                    let header = Header::from_bytes("Content-Type", resp.content_type)
                        .expect("static header");
                    let _ = req.respond(
                        Response::from_string(resp.body)
                            .with_status_code(resp.status)
                            .with_header(header),
                    );
                }
            })
        })
        .collect();
    Ok(SimServer {
        server,
        addr: local,
        workers,
    })
}
