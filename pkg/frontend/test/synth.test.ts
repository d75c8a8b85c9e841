import { describe, expect, it } from "vitest";
import { Player, TICK_SECONDS, pitchToFrequency,
         velocityToGain } from "../src/synth.js";

/** Records every oscillator the player schedules. */
function fakeContext() {
  const scheduled: { frequency: number; gain: number;
                     start: number; stop: number }[] = [];
  const context = {
    currentTime: 0,
    destination: {},
    createOscillator() {
      const record = { frequency: 0, gain: 0, start: 0, stop: 0 };
      scheduled.push(record);
      return {
        frequency: { set value(v: number) { record.frequency = v; },
                     get value() { return record.frequency; } },
        type: "sine",
        connect() {},
        start(when: number) { record.start = when; },
        stop(when: number) { record.stop = when; },
      };
    },
    createGain() {
      const record = scheduled[scheduled.length - 1];
      return {
        gain: {
          value: 0,
          setValueAtTime(value: number) { record.gain = value; },
          linearRampToValueAtTime() {},
        },
        connect() {},
      };
    },
  };
  return { context, scheduled };
}

describe("playback", () => {
  it("pitch 69 plays at 440 Hz within 1 Hz", () => {
    expect(Math.abs(pitchToFrequency(69) - 440)).toBeLessThan(1.0);
    const { context, scheduled } = fakeContext();
    const player = new Player(context);
    player.play([{ pitch: 69, start_tick: 0, duration_ticks: 4,
                   velocity: 100 }]);
    expect(Math.abs(scheduled[0].frequency - 440)).toBeLessThan(1.0);
  });

  it("a 16th note lasts 125 ms at 120 BPM", () => {
    expect(TICK_SECONDS).toBeCloseTo(0.125, 10);
    const { context, scheduled } = fakeContext();
    new Player(context).play([
      { pitch: 60, start_tick: 0, duration_ticks: 1, velocity: 90 },
      { pitch: 64, start_tick: 8, duration_ticks: 2, velocity: 90 },
    ]);
    expect(scheduled[0].stop - scheduled[0].start).toBeCloseTo(0.125, 10);
    expect(scheduled[1].start - scheduled[0].start).toBeCloseTo(1.0, 10);
  });

  it("velocity maps monotonically to gain", () => {
    expect(velocityToGain(0)).toBe(0);
    expect(velocityToGain(127)).toBeGreaterThan(velocityToGain(64));
  });

  it("stop resets the playhead", () => {
    const { context } = fakeContext();
    const player = new Player(context);
    player.play([{ pitch: 60, start_tick: 0, duration_ticks: 4,
                   velocity: 80 }]);
    context.currentTime = 1.0;
    expect(player.playheadTicks()).toBeGreaterThan(0);
    player.stop();
    expect(player.playing).toBe(false);
    expect(player.playheadTicks()).toBe(0);
  });

  it("playback is disabled without an audio context", () => {
    const player = new Player(null);
    expect(player.available).toBe(false);
    player.play([{ pitch: 60, start_tick: 0, duration_ticks: 1,
                   velocity: 80 }]);
    expect(player.playing).toBe(false);
  });
});
