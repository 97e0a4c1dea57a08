// Typed client for the session service. Every method is one endpoint.
export class ApiError extends Error {
    status;
    body;
    constructor(status, body) {
        super(body.detail || body.error);
        this.status = status;
        this.body = body;
    }
}
export class ApiClient {
    baseUrl;
    requestCount = 0;
    constructor(baseUrl = "") {
        this.baseUrl = baseUrl;
    }
    async call(method, path, payload) {
        this.requestCount += 1;
        const response = await fetch(this.baseUrl + path, {
            method,
            headers: payload === undefined ? {} : { "Content-Type": "application/json" },
            body: payload === undefined ? undefined : JSON.stringify(payload),
        });
        const body = await response.json();
        if (!response.ok) {
            throw new ApiError(response.status, body);
        }
        return body;
    }
    listSites() {
        return this.call("GET", "/sites");
    }
    installSite(doc) {
        return this.call("POST", "/sites", doc);
    }
    analysis(site) {
        return this.call("GET", `/sites/${encodeURIComponent(site)}/analysis`);
    }
    templates(site) {
        return this.call("GET", `/sites/${encodeURIComponent(site)}/templates`);
    }
    deriveTemplates(site, payload) {
        return this.call("POST", `/sites/${encodeURIComponent(site)}/templates`, payload);
    }
    createSession(site, template, user) {
        return this.call("POST", "/sessions", {
            site,
            template: template ?? null,
            user: user ?? null,
        });
    }
    page(sessionId) {
        return this.call("GET", `/sessions/${sessionId}/page`);
    }
    click(sessionId, variable) {
        return this.call("POST", `/sessions/${sessionId}/click`, { variable });
    }
    outOfTurn(sessionId, terms) {
        return this.call("POST", `/sessions/${sessionId}/out-of-turn`, { terms });
    }
    choices(sessionId, attribute) {
        return this.call("GET", `/sessions/${sessionId}/choices?attribute=${encodeURIComponent(attribute)}`);
    }
    save(sessionId) {
        return this.call("POST", `/sessions/${sessionId}/save`);
    }
    resume(sessionId) {
        return this.call("POST", `/sessions/${sessionId}/resume`);
    }
}
