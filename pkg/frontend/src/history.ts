// Linear undo history over serialized document snapshots. Snapshots are the
// exact JSON strings we would save, so undo/redo restores byte-identical
// state by construction.

export class History {
  private stack: string[];
  private index: number;

  constructor(initial: string) {
    this.stack = [initial];
    this.index = 0;
  }

  get current(): string {
    return this.stack[this.index];
  }

  /** Push a new snapshot; returns false (and stores nothing) if unchanged. */
  push(snapshot: string): boolean {
    if (snapshot === this.current) return false;
    this.stack.length = this.index + 1;
    this.stack.push(snapshot);
    this.index += 1;
    return true;
  }

  canUndo(): boolean {
    return this.index > 0;
  }

  canRedo(): boolean {
    return this.index < this.stack.length - 1;
  }

  undo(): string | null {
    if (!this.canUndo()) return null;
    this.index -= 1;
    return this.current;
  }

  redo(): string | null {
    if (!this.canRedo()) return null;
    this.index += 1;
    return this.current;
  }

  reset(initial: string): void {
    this.stack = [initial];
    this.index = 0;
  }
}
