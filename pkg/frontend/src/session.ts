import type { ServiceClient } from './client.js'
import type { HistoryItem, Ranking, SessionStatus } from './types.js'

const EMPTY_RANKING: Ranking = { entries: [], contextUsed: [] }

export interface SessionOptions {
  /** how many ranked suggestions to request per step */
  k?: number
  /** base for generated export ids; a counter is appended */
  idBase?: string
  /** mirror accepted choices to POST /selection */
  logSelections?: boolean
}

/**
 * One interactive design session.
 *
 * The session is a thin client: every probability on screen came from
 * the service verbatim, and the whole state is reproducible from
 * (vocabulary, initial budget, ordered choice list). Only the newest
 * recommendation request may apply; responses that were superseded by
 * a later choice or undo are discarded by sequence number.
 */
export class DesignSession {
  readonly vocabulary: string[]
  private readonly initialBudget: Record<string, number> | null
  private readonly client: ServiceClient
  private readonly k: number
  private readonly idBase: string
  private readonly logSelections: boolean

  private choices: string[] = []
  private history: HistoryItem[] = []
  private ranking: Ranking = EMPTY_RANKING
  private seq = 0
  private exportCounter = 0
  private listeners: Array<() => void> = []

  status: SessionStatus = 'active'
  lastError: string | null = null

  private constructor(
    client: ServiceClient,
    vocabulary: string[],
    budget: Record<string, number> | null,
    options: SessionOptions,
  ) {
    this.client = client
    this.vocabulary = [...vocabulary]
    this.initialBudget = budget ? { ...budget } : null
    this.k = options.k ?? 5
    this.idBase = options.idBase ?? `design-${Date.now().toString(36)}`
    this.logSelections = options.logSelections ?? false
  }

  /** Fetch the vocabulary and the empty-prefix ranking. Throws when the
   * service is unreachable so the caller can show an error banner with
   * a retry affordance instead of a session. */
  static async start(
    client: ServiceClient,
    budget: Record<string, number> | null = null,
    options: SessionOptions = {},
  ): Promise<DesignSession> {
    const vocabulary = (await client.vocabulary()).map((s) => s.name)
    const session = new DesignSession(client, vocabulary, budget, options)
    await session.refresh()
    return session
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener)
  }

  private notify(): void {
    for (const listener of this.listeners) listener()
  }

  get prefix(): string[] {
    return [...this.choices]
  }

  get historyItems(): HistoryItem[] {
    return [...this.history]
  }

  /** Latest service ranking, in response order. */
  get currentRanking(): Ranking {
    return this.ranking
  }

  /** Remaining budget, derived from the initial budget and the choice
   * list; never driven negative because selection is guarded. */
  get remainingBudget(): Record<string, number> | null {
    if (!this.initialBudget) return null
    const remaining: Record<string, number> = { ...this.initialBudget }
    for (const symbol of this.choices) {
      if (symbol in remaining) remaining[symbol] = (remaining[symbol] ?? 0) - 1
    }
    return remaining
  }

  get acceptedCount(): number {
    return this.history.filter((h) => h.acceptedTop).length
  }

  /** Exact accepted-top fraction; 0 while the history is empty. */
  get acceptanceRate(): number {
    return this.history.length === 0 ? 0 : this.acceptedCount / this.history.length
  }

  get exportEnabled(): boolean {
    return this.choices.length > 0
  }

  isSelectable(symbol: string): boolean {
    if (this.status !== 'active') return false
    if (!this.vocabulary.includes(symbol)) return false
    const remaining = this.remainingBudget
    if (remaining !== null && (remaining[symbol] ?? 0) <= 0) return false
    return true
  }

  private updateStatus(): void {
    const remaining = this.remainingBudget
    if (remaining !== null && Object.values(remaining).every((c) => c <= 0)) {
      this.status = 'complete'
    }
  }

  /** Request a ranking for the current prefix. Stale responses (a newer
   * request was issued meanwhile) are dropped. */
  async refresh(): Promise<void> {
    const mySeq = ++this.seq
    try {
      const ranking = await this.client.recommend(this.prefix, this.k)
      if (mySeq !== this.seq) return
      this.ranking = ranking
      this.lastError = null
    } catch (err) {
      if (mySeq !== this.seq) return
      this.lastError = err instanceof Error ? err.message : String(err)
    }
    this.notify()
  }

  /** Append a selectable symbol, record whether the top suggestion was
   * accepted, and issue exactly one recommendation request for the
   * extended prefix. */
  async choose(symbol: string): Promise<void> {
    if (!this.isSelectable(symbol)) {
      throw new Error(`symbol not selectable: ${symbol}`)
    }
    const offered = this.ranking
    const acceptedTop = offered.entries[0]?.symbol === symbol
    this.history.push({ offered, chosen: symbol, acceptedTop })
    this.choices.push(symbol)
    this.updateStatus()
    if (this.logSelections) {
      void this.client
        .logSelection(this.choices.slice(0, -1), symbol, acceptedTop)
        .catch(() => undefined)
    }
    this.notify()
    if (this.status === 'active') {
      await this.refresh()
    }
  }

  /** Remove the latest choice; prefix and budget fall back to the prior
   * state and the ranking is re-fetched for the restored prefix. */
  async undo(): Promise<void> {
    if (this.choices.length === 0) return
    this.choices.pop()
    this.history.pop()
    this.status = 'active'
    this.notify()
    await this.refresh()
  }

  /** Ask the service to auto-accept the remainder of the program from
   * the current prefix, then adopt its choices as accepted-top steps. */
  async autocompleteRemainder(seed = 0): Promise<void> {
    if (this.status !== 'active') return
    const result = await this.client.generate(this.prefix, this.remainingBudget, seed)
    const program = result.program
    if (program.slice(0, this.choices.length).join('') !== this.choices.join('')) {
      throw new Error('generated program does not extend the current prefix')
    }
    for (const symbol of program.slice(this.choices.length)) {
      this.history.push({ offered: EMPTY_RANKING, chosen: symbol, acceptedTop: true })
      this.choices.push(symbol)
    }
    this.updateStatus()
    this.notify()
    if (this.status === 'active') {
      await this.refresh()
    }
  }

  /** One corpus-format line with a fresh id, unique per session window. */
  exportLine(): string {
    if (!this.exportEnabled) {
      throw new Error('nothing to export')
    }
    this.exportCounter += 1
    return JSON.stringify({
      id: `${this.idBase}-${this.exportCounter}`,
      symbols: [...this.choices],
    })
  }
}
