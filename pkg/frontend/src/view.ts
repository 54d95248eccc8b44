import type { DesignSession } from './session.js'

export interface SuggestionVM {
  symbol: string
  prob: number
  selectable: boolean
}

export interface SessionVM {
  blocks: string[]
  suggestions: SuggestionVM[]
  contextUsed: string[]
  budget: Array<{ symbol: string; remaining: number }> | null
  acceptedCount: number
  historyLength: number
  acceptanceRate: number
  status: string
  exportEnabled: boolean
  error: string | null
}

/** Pure projection of a session into what the DOM shows. Suggestion
 * order is the service response order, untouched. */
export function sessionViewModel(session: DesignSession): SessionVM {
  const remaining = session.remainingBudget
  return {
    blocks: session.prefix,
    suggestions: session.currentRanking.entries.map((entry) => ({
      symbol: entry.symbol,
      prob: entry.prob,
      selectable: session.isSelectable(entry.symbol),
    })),
    contextUsed: session.currentRanking.contextUsed,
    budget: remaining
      ? Object.keys(remaining)
          .sort()
          .map((symbol) => ({ symbol, remaining: remaining[symbol] ?? 0 }))
      : null,
    acceptedCount: session.acceptedCount,
    historyLength: session.historyItems.length,
    acceptanceRate: session.acceptanceRate,
    status: session.status,
    exportEnabled: session.exportEnabled,
    error: session.lastError,
  }
}

export interface ViewHandlers {
  onChoose(symbol: string): void
  onUndo(): void
  onAutocomplete(): void
  onExport(): void
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag)
  if (className) node.className = className
  if (text !== undefined) node.textContent = text
  return node
}

export function render(root: HTMLElement, vm: SessionVM, handlers: ViewHandlers): void {
  root.replaceChildren()

  if (vm.error) {
    root.appendChild(el('div', 'error-banner', `service error: ${vm.error}`))
  }

  const strip = el('div', 'block-strip')
  if (vm.blocks.length === 0) {
    strip.appendChild(el('span', 'placeholder', 'empty program — pick a first block'))
  }
  for (const block of vm.blocks) {
    strip.appendChild(el('span', 'block', block))
  }
  root.appendChild(strip)

  const sidebar = el('div', 'sidebar')
  sidebar.appendChild(el('h2', undefined, 'suggestions'))
  const list = el('ol', 'suggestions')
  for (const suggestion of vm.suggestions) {
    const item = el('li')
    const button = el('button', 'suggestion', suggestion.symbol)
    button.disabled = !suggestion.selectable
    button.addEventListener('click', () => handlers.onChoose(suggestion.symbol))
    item.appendChild(button)
    item.appendChild(el('span', 'prob', suggestion.prob.toFixed(4)))
    list.appendChild(item)
  }
  sidebar.appendChild(list)
  if (vm.contextUsed.length > 0) {
    sidebar.appendChild(el('div', 'context', `context: ${vm.contextUsed.join(' ')}`))
  }
  root.appendChild(sidebar)

  if (vm.budget) {
    const budget = el('div', 'budget')
    budget.appendChild(el('h2', undefined, 'budget'))
    for (const entry of vm.budget) {
      budget.appendChild(el('span', 'budget-entry', `${entry.symbol}: ${entry.remaining}`))
    }
    root.appendChild(budget)
  }

  const toolbar = el('div', 'toolbar')
  const undoButton = el('button', undefined, 'undo')
  undoButton.disabled = vm.blocks.length === 0
  undoButton.addEventListener('click', handlers.onUndo)
  toolbar.appendChild(undoButton)

  const autoButton = el('button', undefined, 'auto-complete remainder')
  autoButton.disabled = vm.status !== 'active'
  autoButton.addEventListener('click', handlers.onAutocomplete)
  toolbar.appendChild(autoButton)

  const exportButton = el('button', undefined, 'export')
  exportButton.disabled = !vm.exportEnabled
  exportButton.addEventListener('click', handlers.onExport)
  toolbar.appendChild(exportButton)
  root.appendChild(toolbar)

  const stats = el('div', 'stats')
  stats.appendChild(
    el(
      'span',
      'acceptance',
      `accepted top ${vm.acceptedCount}/${vm.historyLength}` +
        (vm.historyLength > 0 ? ` (${(vm.acceptanceRate * 100).toFixed(0)}%)` : ''),
    ),
  )
  stats.appendChild(el('span', 'status', `status: ${vm.status}`))
  root.appendChild(stats)
}
