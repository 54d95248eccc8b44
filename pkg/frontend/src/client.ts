import type { GenerateResult, Ranking, SymbolInfo } from './types.js'

/** Everything the UI ever asks of the backend. All model math lives on
 * the service side; the client only relays. */
export interface ServiceClient {
  vocabulary(): Promise<SymbolInfo[]>
  recommend(prefix: string[], k: number): Promise<Ranking>
  generate(prefix: string[], budget: Record<string, number> | null, seed: number): Promise<GenerateResult>
  logSelection(prefix: string[], chosen: string, acceptedTop: boolean): Promise<void>
}

export class HttpServiceClient implements ServiceClient {
  constructor(private baseUrl: string = '') {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    })
    if (!response.ok) {
      const detail = await response.text()
      throw new Error(`${path} failed (${response.status}): ${detail}`)
    }
    return (await response.json()) as T
  }

  async vocabulary(): Promise<SymbolInfo[]> {
    const response = await fetch(this.baseUrl + '/vocabulary')
    if (!response.ok) {
      throw new Error(`/vocabulary failed (${response.status})`)
    }
    const body = (await response.json()) as { symbols: SymbolInfo[] }
    return body.symbols
  }

  async recommend(prefix: string[], k: number): Promise<Ranking> {
    const body = await this.post<{ ranked: { symbol: string; prob: number }[]; context_used: string[] }>(
      '/recommend',
      { prefix, k },
    )
    return { entries: body.ranked, contextUsed: body.context_used }
  }

  async generate(
    prefix: string[],
    budget: Record<string, number> | null,
    seed: number,
  ): Promise<GenerateResult> {
    const payload: Record<string, unknown> = { prefix, seed }
    if (budget) {
      // budgets are multisets: exhausted symbols are absent, not zero
      const positive = Object.fromEntries(
        Object.entries(budget).filter(([, count]) => count > 0),
      )
      if (Object.keys(positive).length > 0) {
        payload.budget = positive
      }
    }
    return this.post<GenerateResult>('/generate', payload)
  }

  async logSelection(prefix: string[], chosen: string, acceptedTop: boolean): Promise<void> {
    await this.post('/selection', { prefix, chosen, accepted_top: acceptedTop })
  }
}
