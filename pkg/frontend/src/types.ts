export interface RankingEntry {
  symbol: string
  prob: number
}

/** One /recommend response, kept in the exact order the service sent. */
export interface Ranking {
  entries: RankingEntry[]
  contextUsed: string[]
}

export interface HistoryItem {
  offered: Ranking
  chosen: string
  acceptedTop: boolean
}

export type SessionStatus = 'active' | 'complete' | 'error'

export interface SymbolInfo {
  name: string
  category?: string | null
  notes?: string | null
}

export interface GenerateResult {
  id: string
  program: string[]
}
