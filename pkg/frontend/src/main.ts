import { ApiClient } from './api.js'
import { QueueView } from './queue.js'

function boot(): void {
    const root = document.getElementById('app')
    if (!root) throw new Error('missing #app container')
    const params = new URLSearchParams(window.location.search)
    const api = new ApiClient(params.get('api') ?? '')
    const view = new QueueView(api, root, {
        limit: Number(params.get('limit') ?? 20),
        annotatorId: params.get('annotator') ?? 'console',
        pollMs: Number(params.get('poll') ?? 2000),
    })
    view.start()
}

document.addEventListener('DOMContentLoaded', boot)
