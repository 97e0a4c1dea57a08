// Thin DOM renderer: paints the current AppState and wires events back to
// the view-model. No state lives here.
function el(tag, className, text) {
    const node = document.createElement(tag);
    if (className)
        node.className = className;
    if (text !== undefined)
        node.textContent = text;
    return node;
}
function renderStart(state, app, root) {
    const panel = el("div", "panel start-panel");
    panel.appendChild(el("h1", "", "out-of-turn browsing"));
    const siteRow = el("div", "row");
    siteRow.appendChild(el("label", "", "site"));
    const siteSelect = el("select");
    for (const site of state.sites) {
        const option = el("option", "", site);
        option.value = site;
        if (site === state.selectedSite)
            option.selected = true;
        siteSelect.appendChild(option);
    }
    siteSelect.onchange = () => void app.loadTemplates(siteSelect.value);
    siteRow.appendChild(siteSelect);
    panel.appendChild(siteRow);
    const templateRow = el("div", "row");
    templateRow.appendChild(el("label", "", "template"));
    const templateSelect = el("select");
    const none = el("option", "", "(none: vanilla entry)");
    none.value = "";
    templateSelect.appendChild(none);
    for (const template of state.templates) {
        const label = template.user
            ? `${template.name} [${template.user}]`
            : template.name;
        const option = el("option", "", label);
        option.value = template.name;
        if (template.name === state.selectedTemplate)
            option.selected = true;
        templateSelect.appendChild(option);
    }
    templateSelect.onchange = () => {
        state.selectedTemplate = templateSelect.value;
    };
    templateRow.appendChild(templateSelect);
    panel.appendChild(templateRow);
    const userRow = el("div", "row");
    userRow.appendChild(el("label", "", "user"));
    const userInput = el("input");
    userInput.value = state.user;
    userInput.placeholder = "optional user id";
    userInput.oninput = () => {
        state.user = userInput.value;
    };
    userRow.appendChild(userInput);
    panel.appendChild(userRow);
    const startButton = el("button", "primary", "start browsing");
    startButton.onclick = () => void app.start();
    panel.appendChild(startButton);
    root.appendChild(panel);
}
function renderToolbar(app, root) {
    const bar = el("div", "toolbar");
    const input = el("input");
    input.placeholder = "say something out of turn (comma-separated)";
    const submit = () => {
        const text = input.value;
        input.value = "";
        void app.submitTerms(text);
    };
    input.onkeydown = (event) => {
        if (event.key === "Enter")
            submit();
    };
    const button = el("button", "", "tell the site");
    button.onclick = submit;
    bar.appendChild(input);
    bar.appendChild(button);
    root.appendChild(bar);
}
function renderSession(state, app, root) {
    const session = state.session;
    if (!session)
        return;
    renderToolbar(app, root);
    if (state.banner) {
        const banner = el("div", "banner error-banner");
        banner.appendChild(el("strong", "", "that contradicts this session"));
        banner.appendChild(el("div", "", state.banner.message));
        const chain = el("ul", "chain");
        for (const step of state.banner.chain) {
            chain.appendChild(el("li", "", step));
        }
        banner.appendChild(chain);
        root.appendChild(banner);
    }
    for (const warning of state.warnings) {
        root.appendChild(el("div", "banner warning-banner", warning));
    }
    if (state.notice) {
        root.appendChild(el("div", "banner notice-banner", state.notice));
    }
    const pane = el("div", "panel browse-pane");
    const status = el("div", "status", `status: ${session.status}`);
    pane.appendChild(status);
    const page = session.page;
    if (!page) {
        pane.appendChild(el("p", "", "nothing matches this session's information."));
    }
    else {
        if (page.content) {
            pane.appendChild(el("h2", "", page.content.title || page.content.ref));
            if (page.content.body)
                pane.appendChild(el("p", "", page.content.body));
        }
        const list = el("ul", "links");
        for (const edge of page.edges) {
            const item = el("li", edge.resolved ? "resolved" : "");
            const link = el("a", "", edge.anchor);
            link.href = "#";
            link.onclick = (event) => {
                event.preventDefault();
                void app.clickEdge(edge.variable);
            };
            item.appendChild(link);
            list.appendChild(item);
        }
        pane.appendChild(list);
    }
    if (session.status === "completed") {
        const again = el("button", "", "start over");
        again.onclick = () => app.restart();
        pane.appendChild(again);
    }
    root.appendChild(pane);
    const controls = el("div", "panel controls");
    const saveButton = el("button", "", "save for later");
    saveButton.onclick = () => void app.save();
    const resumeButton = el("button", "", "resume");
    resumeButton.onclick = () => void app.resume();
    controls.appendChild(saveButton);
    controls.appendChild(resumeButton);
    const inspector = el("div", "inspector");
    inspector.appendChild(el("h3", "", "remaining choices"));
    const attrInput = el("input");
    attrInput.placeholder = "attribute name";
    const inspectButton = el("button", "", "list");
    inspectButton.onclick = () => void app.inspect(attrInput.value);
    inspector.appendChild(attrInput);
    inspector.appendChild(inspectButton);
    if (state.inspector) {
        inspector.appendChild(el("div", "choices", `${state.inspector.attribute}: ${state.inspector.values.join(", ") || "(none)"}`));
    }
    controls.appendChild(inspector);
    const eliminated = el("details", "eliminated");
    eliminated.appendChild(el("summary", "", `pruned pages (${session.eliminated.length})`));
    const prunedList = el("ul");
    for (const pageId of session.eliminated) {
        prunedList.appendChild(el("li", "", pageId));
    }
    eliminated.appendChild(prunedList);
    controls.appendChild(eliminated);
    root.appendChild(controls);
}
export function render(state, app, root) {
    root.textContent = "";
    if (state.error) {
        root.appendChild(el("div", "banner error-banner", state.error));
    }
    if (state.view === "start") {
        renderStart(state, app, root);
    }
    else {
        renderSession(state, app, root);
    }
}
