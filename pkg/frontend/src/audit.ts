/**
 * Append-only audit trail: one line per explicit reviewer action, so
 * every mark that reaches the service can be traced back to a user
 * gesture. The clock is injectable for deterministic tests.
 */
export class AuditLog {
  private readonly entries: string[] = [];
  private readonly now: () => string;

  constructor(now?: () => string) {
    this.now = now ?? (() => new Date().toISOString());
  }

  append(op: string, payload: unknown): void {
    this.entries.push(`${this.now()} ${op} ${JSON.stringify(payload)}`);
  }

  lines(): readonly string[] {
    return this.entries;
  }

  render(): string {
    return this.entries.join("\n");
  }
}
