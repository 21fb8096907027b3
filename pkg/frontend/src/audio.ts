/** Neutral placeholder feedback sounds via WebAudio beeps. */

export class FeedbackSounds {
  private ctx: AudioContext | null = null;

  private context(): AudioContext {
    if (!this.ctx) this.ctx = new AudioContext();
    return this.ctx;
  }

  /** correct -> rising major beep, wrong -> low buzz, unknown -> single tone */
  play(correct: boolean | null): void {
    const ctx = this.context();
    const gain = ctx.createGain();
    gain.gain.value = 0.08;
    gain.connect(ctx.destination);
    const freqs = correct === true ? [523, 659] : correct === false ? [196] : [392];
    freqs.forEach((freq, i) => {
      const osc = ctx.createOscillator();
      osc.type = "sine";
      const at = ctx.currentTime + i * 0.12;
      osc.frequency.setValueAtTime(freq, at);
      osc.connect(gain);
      osc.start(at);
      osc.stop(at + 0.1);
    });
  }
}
