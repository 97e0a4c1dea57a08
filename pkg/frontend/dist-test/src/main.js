// Bootstrap: one App per tab, re-rendered after every state change.
import { ApiClient } from "./api.js";
import { App } from "./app.js";
import { render } from "./render.js";
const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "";
const root = document.getElementById("app");
if (!root) {
    throw new Error("missing #app container");
}
const app = new App(new ApiClient(base), (state) => render(state, app, root));
void app.loadSites().then(() => {
    if (app.state.selectedSite) {
        return app.loadTemplates(app.state.selectedSite);
    }
});
