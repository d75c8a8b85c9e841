/**
 * Browser wiring: roll canvas with mask overlay, tool palette, job
 * parameter panel, submission with progress, ranked results gallery,
 * and oscillator playback.
 */
import { ServiceClient, FieldErrors, JobOutcome, JobParams } from "./client.js";
import { EmptyMaskError, MaskLayer, Point, ROLL_HEIGHT, ROLL_WIDTH,
         Tool } from "./mask.js";
import { Player, PlayableNote } from "./synth.js";

const ZOOM = 2;

interface AppState {
  rollId: string | null;
  tool: Tool;
  brushRadius: number;
  polygonDraft: Point[];
  dragStart: Point | null;
}

export function mount(root: HTMLElement, baseUrl: string): void {
  const mask = new MaskLayer();
  const state: AppState = {
    rollId: null,
    tool: "brush",
    brushRadius: 3,
    polygonDraft: [],
    dragStart: null,
  };
  const AudioCtx = (window as any).AudioContext ??
                   (window as any).webkitAudioContext ?? null;
  const player = new Player(AudioCtx ? new AudioCtx() : null);

  root.innerHTML = `
    <div class="toolbar">
      <input type="file" id="roll-file" accept=".mid,.midi,.png">
      <span id="roll-status">no roll loaded</span>
      <select id="tool">
        <option value="brush">brush</option>
        <option value="rect">rectangle</option>
        <option value="polygon">polygon</option>
        <option value="erase">erase</option>
      </select>
      <label>radius <input type="range" id="radius" min="1" max="16" value="3"></label>
      <button id="clear-mask">clear mask</button>
    </div>
    <canvas id="roll" width="${ROLL_WIDTH * ZOOM}" height="${ROLL_HEIGHT * ZOOM}"></canvas>
    <div class="panel">
      <label>steps <input id="steps" type="number" value="50"></label>
      <label>repaints (U) <input id="repaints" type="number" value="1"></label>
      <label>samples <input id="n_samples" type="number" value="8"></label>
      <label>top k <input id="top_k" type="number" value="2"></label>
      <label>eta <input id="eta" type="number" step="0.1" value="1.0"></label>
      <label>seed <input id="seed" type="number" value="0"></label>
      <button id="submit">inpaint</button>
      <progress id="progress" max="1" value="0"></progress>
      <span id="message"></span>
    </div>
    <div id="gallery"></div>`;

  const canvas = root.querySelector<HTMLCanvasElement>("#roll")!;
  const ctx = canvas.getContext("2d")!;
  const message = root.querySelector<HTMLElement>("#message")!;
  const progress = root.querySelector<HTMLProgressElement>("#progress")!;
  const gallery = root.querySelector<HTMLElement>("#gallery")!;
  let rollImage: HTMLImageElement | null = null;

  const client = new ServiceClient(baseUrl, {
    onProgress: (value) => { progress.value = value; },
    onNotice: (text) => { message.textContent = text; },
  });

  function redraw(): void {
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    if (rollImage) {
      ctx.imageSmoothingEnabled = false;
      ctx.drawImage(rollImage, 0, 0, canvas.width, canvas.height);
    }
    ctx.fillStyle = "rgba(80, 140, 255, 0.45)";
    for (let y = 0; y < ROLL_HEIGHT; y++) {
      for (let x = 0; x < ROLL_WIDTH; x++) {
        if (mask.get(x, y)) {
          ctx.fillRect(x * ZOOM, y * ZOOM, ZOOM, ZOOM);
        }
      }
    }
    ctx.fillStyle = "rgba(0, 0, 0, 0.35)";
    ctx.fillRect(0, 0, canvas.width, 8 * ZOOM);
    ctx.fillRect(0, canvas.height - 8 * ZOOM, canvas.width, 8 * ZOOM);
  }

  function canvasPoint(event: MouseEvent): Point {
    const bounds = canvas.getBoundingClientRect();
    return {
      x: Math.floor((event.clientX - bounds.left) / ZOOM),
      y: Math.floor((event.clientY - bounds.top) / ZOOM),
    };
  }

  canvas.addEventListener("mousedown", (event) => {
    const point = canvasPoint(event);
    if (state.tool === "polygon") {
      state.polygonDraft.push(point);
      if (event.detail === 2 && state.polygonDraft.length >= 3) {
        mask.polygon(state.polygonDraft);
        state.polygonDraft = [];
        redraw();
      }
      return;
    }
    state.dragStart = point;
    if (state.tool === "brush" || state.tool === "erase") {
      mask.brush(point.x, point.y, state.brushRadius, state.tool === "erase");
      redraw();
    }
  });
  canvas.addEventListener("mousemove", (event) => {
    if (!state.dragStart) return;
    if (state.tool === "brush" || state.tool === "erase") {
      const point = canvasPoint(event);
      mask.brush(point.x, point.y, state.brushRadius, state.tool === "erase");
      redraw();
    }
  });
  canvas.addEventListener("mouseup", (event) => {
    if (state.dragStart && state.tool === "rect") {
      mask.rect(state.dragStart, canvasPoint(event));
      redraw();
    }
    state.dragStart = null;
  });

  root.querySelector<HTMLSelectElement>("#tool")!.addEventListener(
    "change", (event) => {
      state.tool = (event.target as HTMLSelectElement).value as Tool;
      state.polygonDraft = [];
    });
  root.querySelector<HTMLInputElement>("#radius")!.addEventListener(
    "input", (event) => {
      state.brushRadius = Number((event.target as HTMLInputElement).value);
    });
  root.querySelector<HTMLElement>("#clear-mask")!.addEventListener(
    "click", () => { mask.clear(); redraw(); });

  root.querySelector<HTMLInputElement>("#roll-file")!.addEventListener(
    "change", async (event) => {
      const file = (event.target as HTMLInputElement).files?.[0];
      if (!file) return;
      const bytes = new Uint8Array(await file.arrayBuffer());
      const contentType = file.name.endsWith(".png")
        ? "image/png" : "audio/midi";
      try {
        const { id } = await client.uploadRoll(bytes, contentType);
        state.rollId = id;
        rollImage = new Image();
        rollImage.onload = redraw;
        rollImage.src = `${baseUrl}/v1/rolls/${id}/image`;
        root.querySelector("#roll-status")!.textContent = `roll ${id.slice(0, 8)}`;
      } catch (err) {
        message.textContent = String(err);
      }
    });

  root.querySelector<HTMLElement>("#submit")!.addEventListener(
    "click", async () => {
      if (!state.rollId) {
        message.textContent = "load a roll first";
        return;
      }
      const read = (id: string) =>
        Number(root.querySelector<HTMLInputElement>(`#${id}`)!.value);
      const params: Partial<JobParams> = {
        steps: read("steps"), repaints: read("repaints"),
        n_samples: read("n_samples"), top_k: read("top_k"),
        eta: read("eta"), seed: read("seed"),
      };
      message.textContent = "";
      try {
        const outcome = await client.submitAndPoll(
          state.rollId, mask.exportPng(), params);
        renderGallery(outcome);
      } catch (err) {
        if (err instanceof EmptyMaskError || err instanceof FieldErrors) {
          message.textContent = err.message;
        } else {
          message.textContent = `job failed: ${err}`;
        }
      }
    });

  function renderGallery(outcome: JobOutcome): void {
    gallery.innerHTML = "";
    for (const result of outcome.results) {
      const card = document.createElement("div");
      card.className = "result";
      card.innerHTML = `
        <img src="${baseUrl}${result.png_url}" width="${ROLL_WIDTH}">
        <div>rank ${result.rank} — fill score ${result.score.toFixed(2)}
          <a href="${baseUrl}${result.midi_url}" download>download MIDI</a>
          <button ${player.available ? "" : "disabled"}>play</button>
          <button>stop</button>
        </div>`;
      const [playButton, stopButton] = card.querySelectorAll("button");
      playButton.addEventListener("click", async () => {
        const notes = await fetchNotes(`${baseUrl}${result.midi_url}`);
        player.play(notes);
      });
      stopButton.addEventListener("click", () => player.stop());
      gallery.appendChild(card);
    }
  }

  async function fetchNotes(midiUrl: string): Promise<PlayableNote[]> {
    const bytes = new Uint8Array(await (await fetch(midiUrl)).arrayBuffer());
    return decodeMidiNotes(bytes);
  }

  redraw();
}

/**
 * Minimal reader for the service's own MIDI output (format 0/1, note
 * on/off, 480 ticks per quarter, 16th-note grid).
 */
export function decodeMidiNotes(bytes: Uint8Array): PlayableNote[] {
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  if (String.fromCharCode(...bytes.subarray(0, 4)) !== "MThd") {
    throw new Error("not a MIDI file");
  }
  const division = view.getUint16(12);
  const ticksPer16th = division / 4;
  const notes: PlayableNote[] = [];
  let pos = 8 + view.getUint32(4);
  const open = new Map<number, { start: number; velocity: number }>();
  while (pos + 8 <= bytes.length) {
    if (String.fromCharCode(...bytes.subarray(pos, pos + 4)) !== "MTrk") break;
    const end = pos + 8 + view.getUint32(pos + 4);
    let cursor = pos + 8;
    let time = 0;
    let running = 0;
    while (cursor < end) {
      let delta = 0;
      let byte;
      do {
        byte = bytes[cursor++];
        delta = (delta << 7) | (byte & 0x7f);
      } while (byte & 0x80);
      time += delta;
      let status = bytes[cursor];
      if (status & 0x80) cursor++;
      else status = running;
      running = status;
      const kind = status & 0xf0;
      if (kind === 0x90 || kind === 0x80) {
        const pitch = bytes[cursor++];
        const velocity = bytes[cursor++];
        if (kind === 0x90 && velocity > 0) {
          open.set(pitch, { start: time, velocity });
        } else {
          const started = open.get(pitch);
          if (started) {
            notes.push({
              pitch,
              start_tick: started.start / ticksPer16th,
              duration_ticks: (time - started.start) / ticksPer16th,
              velocity: started.velocity,
            });
            open.delete(pitch);
          }
        }
      } else if (status === 0xff) {
        cursor++; // meta type
        let length = 0;
        do {
          byte = bytes[cursor++];
          length = (length << 7) | (byte & 0x7f);
        } while (byte & 0x80);
        cursor += length;
      } else if (kind === 0xc0 || kind === 0xd0) {
        cursor += 1;
      } else {
        cursor += 2;
      }
    }
    pos = end;
  }
  return notes;
}
