/**
 * Oscillator playback for decoded notes: auditioning structure, not
 * timbre.  Tick timing is fixed at 120 BPM where one roll column is a
 * 16th note, i.e. 125 ms.
 */

export const TICK_SECONDS = 0.125;

export interface PlayableNote {
  pitch: number;
  start_tick: number;
  duration_ticks: number;
  velocity: number;
}

/** Equal temperament, A4 (MIDI 69) = 440 Hz. */
export function pitchToFrequency(pitch: number): number {
  return 440 * 2 ** ((pitch - 69) / 12);
}

export function velocityToGain(velocity: number): number {
  return Math.max(0, Math.min(127, velocity)) / 127 * 0.3;
}

/** The WebAudio subset the player needs; injectable for tests. */
export interface AudioContextLike {
  currentTime: number;
  destination: unknown;
  createOscillator(): {
    frequency: { value: number };
    type: string;
    connect(node: unknown): void;
    start(when: number): void;
    stop(when: number): void;
  };
  createGain(): {
    gain: {
      value: number;
      setValueAtTime(value: number, when: number): void;
      linearRampToValueAtTime(value: number, when: number): void;
    };
    connect(node: unknown): void;
  };
}

export class Player {
  private startedAt: number | null = null;
  private stops: (() => void)[] = [];

  constructor(private readonly context: AudioContextLike | null) {}

  /** Playback is disabled (downloads still work) without an audio context. */
  get available(): boolean {
    return this.context !== null;
  }

  get playing(): boolean {
    return this.startedAt !== null;
  }

  play(notes: PlayableNote[]): void {
    if (!this.context) return;
    this.stop();
    const t0 = this.context.currentTime + 0.05;
    this.startedAt = t0;
    for (const note of notes) {
      const osc = this.context.createOscillator();
      const gain = this.context.createGain();
      osc.type = "triangle";
      osc.frequency.value = pitchToFrequency(note.pitch);
      const start = t0 + note.start_tick * TICK_SECONDS;
      const end = start + note.duration_ticks * TICK_SECONDS;
      gain.gain.setValueAtTime(velocityToGain(note.velocity), start);
      gain.gain.linearRampToValueAtTime(0, end);
      osc.connect(gain);
      gain.connect(this.context.destination);
      osc.start(start);
      osc.stop(end);
      this.stops.push(() => osc.stop(this.context!.currentTime));
    }
  }

  stop(): void {
    for (const stopOsc of this.stops) {
      try {
        stopOsc();
      } catch {
        // already ended
      }
    }
    this.stops = [];
    this.startedAt = null;
  }

  /** Playhead position in roll columns; 0 when stopped. */
  playheadTicks(): number {
    if (!this.context || this.startedAt === null) return 0;
    return Math.max(0,
      (this.context.currentTime - this.startedAt) / TICK_SECONDS);
  }
}
