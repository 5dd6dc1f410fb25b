"""Streaming pipeline: bounded queues between stage threads, live control
applied at trial boundaries, per-stage timing against the block budget.

Stage graph (stages are skipped when not configured):

    source -> [filter] -> epoching -> [inverse] -> connectivity -> publish

Each stage is the single consumer of its input queue and single producer
of its output queue; control messages enter through a dedicated queue
drained by the connectivity stage between trials.
"""

from __future__ import annotations

import queue
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import netio
from .core import (ConnectivityNetwork, FrequencyBand, MetricId,
                   ParameterError, normalize_network, serialize_network,
                   threshold_network)
from .inverse import InverseOperator, apply_inverse
from .metrics import ConnectivityEngine
from .preprocess import (PENDING, EpochSpec, FirFilter, OverlapAddFilter,
                         RingBuffer, TriggerDetector, baseline_correct,
                         extract_epoch, reject_epoch)
from .recording import RawRecording, replay

_SENTINEL = object()


@dataclass
class PipelineConfig:
    block_size: int = 500
    nfft: int = 600
    metric: MetricId = MetricId.COH
    band: tuple = (8, 12)              # (lo_bin, hi_bin)
    threshold: float | None = None     # keep-fraction; None = publish dense
    normalize: bool = True
    storage_mode: bool = True
    fir: FirFilter | None = None
    compensate_delay: bool = True
    epoch: EpochSpec | None = None
    trigger_threshold: float = 0.5
    inverse_op: InverseOperator | None = None
    max_lag: int | None = None
    queue_capacity: int = 8
    lossy: bool = False
    speed: float = 1.0

    def __post_init__(self):
        if self.block_size < 1:
            raise ParameterError("block_size must be >= 1")
        if self.queue_capacity < 1:
            raise ParameterError("queue_capacity must be >= 1")


@dataclass
class StageTiming:
    """Per-block processing time of every active stage, in milliseconds."""

    block_index: int
    budget_ms: float
    stage_ms: dict = field(default_factory=dict)

    def to_json(self) -> str:
        import json
        return json.dumps({"block_index": self.block_index,
                           "budget_ms": self.budget_ms,
                           "stage_ms": {k: round(v, 4)
                                        for k, v in self.stage_ms.items()}})


@dataclass
class PipelineReport:
    networks: list = field(default_factory=list)
    timings: list = field(default_factory=list)
    accepted_trials: int = 0
    rejected_trials: int = 0
    dropped_blocks: int = 0
    budget_violations: int = 0
    error: BaseException | None = None


class _BoundedQueue:
    """Blocking by default (lossless); lossy mode drops the oldest item."""

    def __init__(self, capacity: int, lossy: bool):
        self._q = queue.Queue(maxsize=capacity)
        self._lossy = lossy
        self.dropped = 0

    def put(self, item):
        if not self._lossy:
            self._q.put(item)
            return
        while True:
            try:
                self._q.put_nowait(item)
                return
            except queue.Full:
                try:
                    self._q.get_nowait()
                    self.dropped += 1
                except queue.Empty:
                    pass

    def get(self):
        return self._q.get()


class Pipeline:
    """One pipeline per process; run() blocks until the source is drained."""

    def __init__(self, recording: RawRecording, config: PipelineConfig,
                 on_network=None, on_timing=None, on_epoch=None,
                 publisher: netio.TcpPublisher | None = None,
                 ws: "netio.WsMirror | None" = None,
                 collect_networks: bool = True):
        self.collect_networks = collect_networks
        self.rec = recording
        self.cfg = config
        self.on_network = on_network
        self.on_timing = on_timing
        self.on_epoch = on_epoch
        self.publisher = publisher
        self.ws = ws
        self.control_queue: "queue.Queue[netio.ControlMessage]" = queue.Queue()
        self.report = PipelineReport()
        self._budget_ms = 1000.0 * config.block_size / recording.sfreq
        self._threads: list[threading.Thread] = []
        self._error_lock = threading.Lock()

        n_nodes = (config.inverse_op.M.shape[0] if config.inverse_op is not None
                   else len(recording.data_channels))
        positions = None
        if config.inverse_op is not None and config.inverse_op.source_positions is not None:
            positions = config.inverse_op.source_positions
        self.engine = ConnectivityEngine(
            n_nodes, config.nfft, recording.sfreq,
            storage_mode=config.storage_mode, max_lag=config.max_lag,
            positions=positions,
            accumulate_band=config.band if config.storage_mode else None)
        self._metric = config.metric
        self._band = FrequencyBand(config.band[0], config.band[1],
                                   recording.sfreq / config.nfft)
        self._threshold = config.threshold
        self._average_count: int | None = None
        self.final_network: ConnectivityNetwork | None = None

    # -- control ------------------------------------------------------------

    def submit_control(self, msg: netio.ControlMessage) -> tuple[bool, str]:
        """Validate against the session and enqueue; used as the control
        sink of the TCP/WS servers."""
        if msg.kind == "set_band":
            if msg.hi >= self.engine.acc.n_bins:
                return False, f"band exceeds {self.engine.acc.n_bins} bins"
        if msg.kind == "set_average_count" and not self.cfg.storage_mode:
            return False, "trial window control requires storage mode"
        self.control_queue.put(msg)
        return True, ""

    def _apply_pending_controls(self):
        while True:
            try:
                msg = self.control_queue.get_nowait()
            except queue.Empty:
                return
            if msg.kind == "set_metric":
                self._metric = msg.metric
            elif msg.kind == "set_band":
                self._band = FrequencyBand(msg.lo, msg.hi, self._band.bin_hz)
            elif msg.kind == "set_threshold":
                self._threshold = msg.fraction
            elif msg.kind == "set_average_count":
                self._average_count = msg.count
                self.engine.rebuild_last(msg.count)
            elif msg.kind == "reset_accumulators":
                self.engine.reset()

    # -- stages -------------------------------------------------------------

    def _record_time(self, timing_map, stage, dt):
        timing_map[stage] = timing_map.get(stage, 0.0) + dt * 1000.0

    def _stage_wrapper(self, fn, name):
        def run():
            try:
                fn()
            except BaseException as exc:  # noqa: BLE001 - stage panic policy
                with self._error_lock:
                    if self.report.error is None:
                        self.report.error = exc
                self._shutdown_downstream()
        t = threading.Thread(target=run, name=name, daemon=True)
        self._threads.append(t)
        return t

    def _shutdown_downstream(self):
        for q in self._queues:
            q.put(_SENTINEL)

    def run(self) -> PipelineReport:
        cfg = self.cfg
        cap, lossy = cfg.queue_capacity, cfg.lossy
        q_blocks = _BoundedQueue(cap, lossy)
        q_epochs = _BoundedQueue(cap, False)
        self._queues = [q_blocks, q_epochs]
        timings: dict[int, StageTiming] = {}
        timings_lock = threading.Lock()

        def timing_for(block_index):
            with timings_lock:
                if block_index not in timings:
                    timings[block_index] = StageTiming(block_index,
                                                      self._budget_ms)
                return timings[block_index]

        trig_ch = (self.rec.trigger_channels[0]
                   if self.rec.trigger_channels else None)
        data_ch = self.rec.data_channels

        def source():
            for block in replay(self.rec, cfg.block_size, cfg.speed):
                q_blocks.put(block)
            q_blocks.put(_SENTINEL)

        def frontend():
            """Filter + trigger detection + epoching in one stage thread."""
            ola = OverlapAddFilter(cfg.fir) if cfg.fir is not None else None
            shift = (cfg.fir.group_delay
                     if cfg.fir is not None and cfg.compensate_delay else 0)
            spec = cfg.epoch or EpochSpec(tmin=0.0,
                                          tmax=cfg.block_size / self.rec.sfreq)
            lo, hi = spec.window_samples(self.rec.sfreq)
            window = hi - lo
            capacity = max(8 * cfg.block_size, 8 * window, 4096)
            ring = RingBuffer(len(data_ch), capacity)
            det = (TriggerDetector(cfg.trigger_threshold)
                   if trig_ch is not None else None)
            pending: list = []
            block_index = 0
            trial_index = 0
            while True:
                block = q_blocks.get()
                if block is _SENTINEL:
                    break
                t0 = time.perf_counter()
                data = block[data_ch]
                if ola is not None:
                    data = ola.process(data)
                ring.append(data)
                if det is not None:
                    pending.extend(det.process(block[trig_ch]))
                    still = []
                    for marker in pending:
                        ep = extract_epoch(ring, marker, spec, self.rec.sfreq,
                                           trial_index=trial_index,
                                           sample_shift=shift)
                        if ep is PENDING:
                            still.append(marker)
                            continue
                        if reject_epoch(ep, spec):
                            self.report.rejected_trials += 1
                            continue
                        ep = baseline_correct(ep, spec)
                        q_epochs.put((block_index, ep))
                        trial_index += 1
                    pending = still
                else:
                    # spontaneous mode: every block is handled as one trial
                    from .core import EpochMatrix
                    q_epochs.put((block_index,
                                  EpochMatrix(data=data, sfreq=self.rec.sfreq,
                                              trial_index=trial_index)))
                    trial_index += 1
                self._record_time(timing_for(block_index).stage_ms,
                                  "preprocess", time.perf_counter() - t0)
                block_index += 1
            q_epochs.put(_SENTINEL)

        def backend():
            """Inverse projection + connectivity update + publish."""
            while True:
                item = q_epochs.get()
                if item is _SENTINEL:
                    break
                block_index, ep = item
                tm = timing_for(block_index)
                if cfg.inverse_op is not None:
                    t0 = time.perf_counter()
                    ep = apply_inverse(cfg.inverse_op, ep)
                    self._record_time(tm.stage_ms, "inverse",
                                      time.perf_counter() - t0)
                if self.on_epoch is not None:
                    self.on_epoch(ep)
                self._apply_pending_controls()
                t0 = time.perf_counter()
                net = self.engine.update_and_finalize(ep, self._metric,
                                                      self._band)
                if self._average_count is not None \
                        and self.engine.n_trials > self._average_count:
                    self.engine.rebuild_last(self._average_count)
                    net = self.engine.finalize(self._metric, self._band)
                if cfg.normalize:
                    net = normalize_network(net)
                if self._threshold is not None:
                    net = threshold_network(net, self._threshold)
                self._record_time(tm.stage_ms, "connectivity",
                                  time.perf_counter() - t0)
                t0 = time.perf_counter()
                self._publish(net, tm)
                self._record_time(tm.stage_ms, "publish",
                                  time.perf_counter() - t0)
                self.report.accepted_trials += 1
                self.final_network = net
                if self.on_network is not None:
                    self.on_network(net)

        threads = [self._stage_wrapper(source, "source"),
                   self._stage_wrapper(frontend, "frontend"),
                   self._stage_wrapper(backend, "backend")]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

        self.report.dropped_blocks = q_blocks.dropped
        for tm in sorted(timings.values(), key=lambda x: x.block_index):
            if any(ms > tm.budget_ms for ms in tm.stage_ms.values()):
                self.report.budget_violations += 1
            self.report.timings.append(tm)
            if self.on_timing is not None:
                self.on_timing(tm)
        if self.report.error is not None:
            raise RuntimeError("pipeline stage failed") from self.report.error
        return self.report

    def _publish(self, net: ConnectivityNetwork, tm: StageTiming):
        payload = serialize_network(net)
        if self.collect_networks:
            self.report.networks.append(net)
        if self.publisher is not None:
            self.publisher.broadcast(netio.encode_frame(netio.FRAME_NETWORK,
                                                        payload))
            self.publisher.broadcast(netio.encode_frame(
                netio.FRAME_TIMING, tm.to_json().encode("utf-8")))
        if self.ws is not None:
            self.ws.broadcast_json("network", payload.decode("utf-8"))
            self.ws.broadcast_json("timing", tm.to_json())


def run_pipeline(recording: RawRecording, config: PipelineConfig,
                 control_messages=(), **kwargs) -> PipelineReport:
    """Convenience one-shot run with pre-queued control messages."""
    pipe = Pipeline(recording, config, **kwargs)
    for msg in control_messages:
        pipe.control_queue.put(msg)
    return pipe.run()
