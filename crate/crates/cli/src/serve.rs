use crate::{load_scenario, write_artifacts, ServeArgs};
use anyhow::{Context, Result};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use stairwise::session::{
    encode_server, Session, SessionHandle, SessionOptions, DEFAULT_CLIENT_CAPACITY,
};
use std::time::Duration;
use tokio::sync::{mpsc, watch};

#[derive(Clone)]
struct AppState {
    session: SessionHandle,
    shutdown: watch::Receiver<bool>,
}

pub fn cmd_serve(args: &ServeArgs) -> Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting the async runtime")?;
    runtime.block_on(serve(args))
}

async fn serve(args: &ServeArgs) -> Result<()> {
    let scenario = args.scenario.as_deref().map(load_scenario).transpose()?;
    let listener = tokio::net::TcpListener::bind(&args.listen)
        .await
        .with_context(|| format!("binding {}", args.listen))?;
    let addr = listener.local_addr()?;
    let session = Session::spawn(scenario, SessionOptions::default());
    let (stop_tx, stop_rx) = watch::channel(false);
    let app = Router::new()
        .route("/ws", get(upgrade))
        .with_state(AppState {
            session: session.handle(),
            shutdown: stop_rx,
        });
    tracing::info!(%addr, "serving the session protocol at /ws");
    println!("listening on {addr}");
    axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("interrupted, shutting down");
            let _ = stop_tx.send(true);
        })
        .await
        .context("serving")?;
    let last = tokio::task::spawn_blocking(move || session.shutdown()).await?;
    if let (Some(dir), Some(last)) = (&args.out, last) {
        write_artifacts(dir, &last.world, &last.report)?;
        tracing::info!(dir = %dir.display(), interrupted = last.report.interrupted, "report written");
    }
    Ok(())
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn client(mut socket: WebSocket, mut state: AppState) {
    let (tx, mut events) = mpsc::channel::<String>(64);
    let subscription = state.session.subscribe(DEFAULT_CLIENT_CAPACITY);
    // The hub never blocks, so a slow socket only backs up this client's
    // queue, where refreshable events get dropped.
    let forwarder = tokio::task::spawn_blocking(move || {
        while !tx.is_closed() {
            if let Some(frame) = subscription.recv_timeout(Duration::from_millis(100)) {
                if tx.blocking_send(encode_server(&frame)).is_err() {
                    break;
                }
            }
        }
    });
    tracing::debug!("client attached");
    loop {
        tokio::select! {
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t.to_string(),
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let session = state.session.clone();
                let replies = match tokio::task::spawn_blocking(move || session.request_text(&text)).await {
                    Ok(r) => r,
                    Err(_) => break,
                };
                for r in replies {
                    if socket.send(Message::Text(encode_server(&r).into())).await.is_err() {
                        break;
                    }
                }
            }
            Some(text) = events.recv() => {
                if socket.send(Message::Text(text.into())).await.is_err() {
                    break;
                }
            }
            _ = state.shutdown.changed() => {
                let _ = socket.send(Message::Close(None)).await;
                break;
            }
        }
    }
    drop(events);
    let _ = forwarder.await;
    tracing::debug!("client detached");
}
