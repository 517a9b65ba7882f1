import { ApiClient, LoopStatus, QueueItem, SubmitResult } from './api.js'
import { renderHistogram } from './histogram.js'
import { renderSample } from './scatter.js'

export type QueueViewOptions = {
    limit?: number
    annotatorId?: string
    pollMs?: number
}

// The annotation console: a status banner, an error/retry banner, and the
// pending queue in exactly the order the server returns it (uncertainty
// descending). All rendered values originate from server responses.
export class QueueView {
    readonly root: HTMLElement
    private statusBanner: HTMLDivElement
    private errorBanner: HTMLDivElement
    private list: HTMLUListElement
    private items: QueueItem[] = []
    private timer: ReturnType<typeof setInterval> | null = null
    private limit: number
    private annotatorId: string
    private pollMs: number

    constructor(private api: ApiClient, root: HTMLElement,
        options: QueueViewOptions = {}) {
        this.root = root
        this.limit = options.limit ?? 20
        this.annotatorId = options.annotatorId ?? 'console'
        this.pollMs = options.pollMs ?? 2000

        this.statusBanner = document.createElement('div')
        this.statusBanner.className = 'status-banner'
        this.errorBanner = document.createElement('div')
        this.errorBanner.className = 'error-banner'
        this.errorBanner.hidden = true
        this.list = document.createElement('ul')
        this.list.className = 'queue'
        this.root.append(this.statusBanner, this.errorBanner, this.list)

        this.root.addEventListener('keydown', (e) => this.onKey(e as KeyboardEvent))
    }

    start(): void {
        void this.refresh()
        this.timer = setInterval(() => void this.refresh(), this.pollMs)
    }

    stop(): void {
        if (this.timer !== null) clearInterval(this.timer)
        this.timer = null
    }

    // One polling step: queue + status. A network failure keeps the current
    // DOM untouched and surfaces a retry banner instead.
    async refresh(): Promise<void> {
        try {
            const [items, status] = await Promise.all([
                this.api.fetchQueue(this.limit),
                this.api.fetchStatus(),
            ])
            this.errorBanner.hidden = true
            this.items = items
            this.renderStatus(status)
            this.renderList()
        } catch (err) {
            this.errorBanner.hidden = false
            this.errorBanner.textContent =
                `service unreachable (${String(err)}); retrying…`
        }
    }

    private renderStatus(status: LoopStatus): void {
        const acc = status.validation_accuracy === null
            ? 'n/a' : status.validation_accuracy.toFixed(3)
        this.statusBanner.textContent =
            `iteration ${status.iteration} · ` +
            `labelled ${(100 * status.labelled_fraction).toFixed(1)}% · ` +
            `validation accuracy ${acc} · ` +
            `${status.queue.pending} pending · ${status.run_state}`
    }

    private renderList(): void {
        const focused = document.activeElement instanceof HTMLElement
            ? document.activeElement.closest<HTMLElement>('.queue-item')?.dataset.sampleId
            : undefined
        this.list.textContent = ''
        if (this.items.length === 0) {
            const empty = document.createElement('li')
            empty.className = 'queue-empty'
            empty.textContent = 'no pending samples'
            this.list.appendChild(empty)
            return
        }
        for (const item of this.items) {
            this.list.appendChild(this.renderItem(item))
        }
        if (focused !== undefined) {
            this.list.querySelector<HTMLElement>(
                `.queue-item[data-sample-id="${focused}"]`)?.focus()
        } else {
            this.list.querySelector<HTMLElement>('.queue-item')?.focus()
        }
    }

    private renderItem(item: QueueItem): HTMLLIElement {
        const li = document.createElement('li')
        li.className = 'queue-item'
        li.tabIndex = 0
        li.dataset.sampleId = String(item.sample_id)

        const header = document.createElement('header')
        header.textContent = `sample ${item.sample_id} · ` +
            `σ=${item.scalar_uncertainty.toFixed(4)} · ` +
            `μ=[${item.mu.map(v => v.toFixed(2)).join(', ')}] · ` +
            `iteration ${item.enqueue_iteration}`
        li.appendChild(header)

        li.appendChild(renderSample(item, this.items))
        li.appendChild(renderHistogram(item.histogram))

        const buttons = document.createElement('div')
        buttons.className = 'label-buttons'
        for (let cls = 0; cls < item.mu.length; cls++) {
            const button = document.createElement('button')
            button.textContent = `label ${cls} (key ${cls})`
            button.dataset.label = String(cls)
            button.addEventListener('click', () =>
                void this.submit(item.sample_id, cls))
            buttons.appendChild(button)
        }
        li.appendChild(buttons)

        const note = document.createElement('div')
        note.className = 'item-note'
        li.appendChild(note)
        return li
    }

    // Submit a label; optimistic removal on success, inline surfacing of
    // conflicts (the server keeps the first valid submission).
    async submit(sampleId: number, label: number): Promise<SubmitResult> {
        const result = await this.api.submitLabel(sampleId, label,
            this.annotatorId)
        if (result.kind === 'ok') {
            this.items = this.items.filter(i => i.sample_id !== sampleId)
            this.renderList()
        } else {
            const row = this.list.querySelector<HTMLElement>(
                `.queue-item[data-sample-id="${sampleId}"] .item-note`)
            const message = `${result.kind}: ${result.message}`
            if (row) {
                row.textContent = message
            } else {
                this.errorBanner.hidden = false
                this.errorBanner.textContent = message
            }
            void this.refresh()
        }
        return result
    }

    // Keyboard-only path: digits label the focused item, arrows or j/k move.
    private onKey(event: KeyboardEvent): void {
        const active = document.activeElement instanceof HTMLElement
            ? document.activeElement.closest<HTMLElement>('.queue-item')
            : null
        if (event.key >= '0' && event.key <= '9') {
            if (!active?.dataset.sampleId) return
            const label = Number(event.key)
            const item = this.items.find(
                i => i.sample_id === Number(active.dataset.sampleId))
            if (item && label < item.mu.length) {
                event.preventDefault()
                void this.submit(item.sample_id, label)
            }
            return
        }
        if (['ArrowDown', 'j', 'ArrowUp', 'k'].includes(event.key)) {
            event.preventDefault()
            const rows = Array.from(
                this.list.querySelectorAll<HTMLElement>('.queue-item'))
            if (rows.length === 0) return
            const index = active ? rows.indexOf(active) : -1
            const forward = event.key === 'ArrowDown' || event.key === 'j'
            const next = forward
                ? Math.min(rows.length - 1, index + 1)
                : Math.max(0, index - 1)
            rows[next].focus()
        }
    }

    pendingIds(): number[] {
        return this.items.map(i => i.sample_id)
    }
}
