import { HttpServiceClient } from './client.js'
import { DesignSession } from './session.js'
import { render, sessionViewModel } from './view.js'

function download(name: string, line: string): void {
  const blob = new Blob([line + '\n'], { type: 'application/jsonl' })
  const url = URL.createObjectURL(blob)
  const anchor = document.createElement('a')
  anchor.href = url
  anchor.download = name
  anchor.click()
  URL.revokeObjectURL(url)
}

function budgetFromQuery(): Record<string, number> | null {
  // ?budget=AND:1,OR:1,TON:1
  const raw = new URLSearchParams(window.location.search).get('budget')
  if (!raw) return null
  const budget: Record<string, number> = {}
  for (const part of raw.split(',')) {
    const [symbol, count] = part.split(':')
    if (symbol && count) budget[symbol] = parseInt(count, 10)
  }
  return Object.keys(budget).length > 0 ? budget : null
}

async function boot(): Promise<void> {
  const root = document.getElementById('app')
  if (!root) throw new Error('missing #app container')
  const client = new HttpServiceClient('')

  let session: DesignSession
  try {
    session = await DesignSession.start(client, budgetFromQuery(), {
      logSelections: true,
    })
  } catch (err) {
    root.replaceChildren()
    const banner = document.createElement('div')
    banner.className = 'error-banner'
    banner.textContent = `cannot reach the recommendation service: ${err}`
    const retry = document.createElement('button')
    retry.textContent = 'retry'
    retry.addEventListener('click', () => void boot())
    root.replaceChildren(banner, retry)
    return
  }

  let exportCount = 0
  const redraw = () =>
    render(root, sessionViewModel(session), {
      onChoose: (symbol) => void session.choose(symbol),
      onUndo: () => void session.undo(),
      onAutocomplete: () => void session.autocompleteRemainder(Date.now() % 100000),
      onExport: () => {
        exportCount += 1
        download(`program-${exportCount}.jsonl`, session.exportLine())
      },
    })
  session.onChange(redraw)
  redraw()
}

void boot()
